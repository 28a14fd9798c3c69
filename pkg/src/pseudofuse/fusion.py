"""Pseudo-sample matching: augment a small RCT with matched observational rows.

The pipeline: compute the overall and per-treatment mean vectors on the
selected features, shift every RCT row by (1 + 1/k) times its group's
deviation from the overall mean to form pseudo samples, min-max normalize
pseudo and observational data jointly, then pull each pseudo sample's k
nearest observational neighbors from the same (treatment, bucket) cell. The
fused output is the original RCT plus the matched observational rows, whose
group means on the selected features land back on the overall RCT mean.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .datasets import Dataset, concat
from .nnindex import KdTree, brute_knn


@dataclass
class FeatureSelection:
    """Selected matching columns and their distance weights."""

    indices: list[int]
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("selected feature indices must be unique")
        if self.weights is None:
            self.weights = np.ones(len(self.indices))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.indices),):
            raise ValueError("weights length must match selected feature count")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")


@dataclass
class BucketSpec:
    """Bucketing columns; continuous columns carry strictly increasing edges,
    discrete columns pass through (edges=None). Bins are left-closed."""

    columns: list[int] = field(default_factory=list)
    edges: dict[int, list[float] | None] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for col in self.columns:
            e = self.edges.get(col)
            if e is not None and np.any(np.diff(e) <= 0):
                raise ValueError(f"bucket edges for column {col} must be strictly increasing")

    def ids(self, features: np.ndarray) -> np.ndarray:
        """Per-row bucket identifier as an (n, n_cols) int matrix."""
        n = features.shape[0]
        if not self.columns:
            return np.zeros((n, 1), dtype=np.int64)
        out = np.empty((n, len(self.columns)), dtype=np.int64)
        for j, col in enumerate(self.columns):
            vals = features[:, col]
            e = self.edges.get(col)
            if e is None:
                out[:, j] = vals.astype(np.int64)
            else:
                # below first edge -> 0, at-or-above an edge -> right bin
                out[:, j] = np.searchsorted(np.asarray(e), vals, side="right")
        return out


@dataclass
class FusionPlan:
    """Mean vectors and normalization state for one fusion run."""

    v_avg: np.ndarray
    v_by_treatment: dict[int, np.ndarray]
    delta: dict[int, np.ndarray]
    v_obs_target: dict[int, np.ndarray]
    ratio: int
    norm_min: np.ndarray | None = None
    norm_range: np.ndarray | None = None


@dataclass
class FuseConfig:
    selection: FeatureSelection
    buckets: BucketSpec = field(default_factory=BucketSpec)
    ratio: int = 3
    backend: str = "kdtree"  # "brute" | "kdtree"
    metric: str = "l2"  # "l2" | "l1" (l1 is brute-only)
    max_distance: float | None = None
    replacement: bool = False
    n_jobs: int = 1

    def validate(self) -> None:
        if self.ratio <= 0:
            raise ValueError("fusion ratio k must be a positive integer")
        if self.backend not in ("brute", "kdtree"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.metric not in ("l2", "l1"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == "l1" and self.backend != "brute":
            raise ValueError("the L1 metric is only available with the brute backend")


def compute_mean_vectors(rct: Dataset, sel: FeatureSelection, ratio: int) -> FusionPlan:
    """Overall and per-treatment means on the selected columns, plus targets."""
    if ratio <= 0:
        raise ValueError("fusion ratio k must be a positive integer")
    X = rct.features[:, sel.indices]
    v_avg = X.mean(axis=0)
    v_by, delta, target = {}, {}, {}
    for t in rct.treatment_ids():
        rows = X[rct.treatment == t]
        if rows.shape[0] == 0:
            raise ValueError(f"treatment group {t} is empty")
        v_by[int(t)] = rows.mean(axis=0)
        delta[int(t)] = v_avg - v_by[int(t)]
        target[int(t)] = v_by[int(t)] + (1.0 + 1.0 / ratio) * delta[int(t)]
    return FusionPlan(
        v_avg=v_avg, v_by_treatment=v_by, delta=delta, v_obs_target=target, ratio=ratio
    )


def build_pseudo_samples(rct: Dataset, plan: FusionPlan, sel: FeatureSelection) -> np.ndarray:
    """Shift each row's selected columns by (1 + 1/k) * delta of its group.

    Returns a full feature matrix: non-selected columns are copied unchanged.
    """
    pseudo = rct.features.copy()
    factor = 1.0 + 1.0 / plan.ratio
    for t, d in plan.delta.items():
        mask = rct.treatment == t
        pseudo[np.ix_(mask, sel.indices)] += factor * d
    return pseudo


def fit_normalization(
    pseudo_sel: np.ndarray, obs_sel: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Min-max parameters over the union of both matrices, per column.

    Constant columns get range 0 and normalize to 0 everywhere.
    """
    lo = np.minimum(pseudo_sel.min(axis=0), obs_sel.min(axis=0))
    hi = np.maximum(pseudo_sel.max(axis=0), obs_sel.max(axis=0))
    return lo, hi - lo


def apply_normalization(X: np.ndarray, lo: np.ndarray, rng: np.ndarray) -> np.ndarray:
    safe = np.where(rng > 0, rng, 1.0)
    out = (X - lo) / safe
    return np.where(rng > 0, out, 0.0)


def weighted_distance(
    p: np.ndarray, q: np.ndarray, w: np.ndarray | None = None, metric: str = "l2"
) -> float:
    """Weighted distance between two equal-length vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("vectors must have equal length")
    if w is None:
        w = np.ones_like(p)
    if metric == "l1":
        return float(np.sum(w * np.abs(p - q)))
    return float(np.sqrt(np.sum(w * (p - q) ** 2)))


@dataclass
class FusionResult:
    fused: Dataset
    provenance: pd.DataFrame  # obs_row, pseudo_index, rank, distance, bucket, treatment
    report: pd.DataFrame  # per (bucket, treatment) cell stats
    plan: FusionPlan


def _match_bucket(
    bucket_key: tuple,
    pseudo_rows: np.ndarray,
    pseudo_norm: np.ndarray,
    pseudo_t: np.ndarray,
    cell_obs: dict[int, np.ndarray],
    obs_norm: np.ndarray,
    cfg: FuseConfig,
) -> list[tuple]:
    """Greedy matching inside one bucket; candidate pools are bucket-local."""
    k = cfg.ratio
    matches: list[tuple] = []
    indexes: dict[int, object] = {}
    active: dict[int, np.ndarray] = {}
    for q in pseudo_rows:
        t = int(pseudo_t[q])
        obs_ids = cell_obs.get(t)
        if obs_ids is None or len(obs_ids) == 0:
            continue
        if t not in active:
            active[t] = np.ones(len(obs_ids), dtype=bool)
        if cfg.metric == "l1":
            d = np.sum(np.abs(obs_norm[obs_ids] - pseudo_norm[q]) * cfg.selection.weights, axis=1)
            d = np.where(active[t], d, np.inf)
            order = np.lexsort((obs_ids, d))
            found = [
                (int(obs_ids[i]), float(d[i]), int(i))
                for i in order[:k]
                if np.isfinite(d[i])
            ]
        elif cfg.backend == "kdtree":
            if t not in indexes:
                indexes[t] = KdTree(
                    obs_norm[obs_ids], ids=obs_ids, weights=cfg.selection.weights
                )
            found = [
                (oid, dist, int(np.searchsorted(obs_ids, oid)))
                for oid, dist in indexes[t].query(pseudo_norm[q], k, active=active[t])
            ]
        else:
            pos = {int(o): i for i, o in enumerate(obs_ids)}
            found = [
                (oid, dist, pos[oid])
                for oid, dist in brute_knn(
                    pseudo_norm[q],
                    obs_norm[obs_ids],
                    k,
                    weights=cfg.selection.weights,
                    ids=obs_ids,
                    active=active[t],
                )
            ]
        rank = 0
        for oid, dist, local in found:
            if cfg.max_distance is not None and dist > cfg.max_distance:
                continue
            matches.append((bucket_key, int(q), rank, oid, dist, t))
            rank += 1
            if not cfg.replacement:
                active[t][local] = False
    return matches


def fuse(rct: Dataset, obs: Dataset, cfg: FuseConfig) -> FusionResult:
    """Algorithm: pseudo-sample construction, joint normalization, per-cell kNN."""
    cfg.validate()
    sel = cfg.selection
    missing = set(rct.treatment_ids()) - set(obs.treatment_ids())
    if missing:
        raise ValueError(f"observational data lacks treatments {sorted(missing)}")
    plan = compute_mean_vectors(rct, sel, cfg.ratio)
    pseudo = build_pseudo_samples(rct, plan, sel)

    lo, rng = fit_normalization(pseudo[:, sel.indices], obs.features[:, sel.indices])
    plan.norm_min, plan.norm_range = lo, rng
    pseudo_norm = apply_normalization(pseudo[:, sel.indices], lo, rng)
    obs_norm = apply_normalization(obs.features[:, sel.indices], lo, rng)

    pseudo_buckets = cfg.buckets.ids(pseudo)
    obs_buckets = cfg.buckets.ids(obs.features)

    # group rows per bucket; obs further per treatment (sorted ids keep the
    # searchsorted inverse in _match_bucket valid)
    def key_of(row: np.ndarray) -> tuple:
        return tuple(int(v) for v in row)

    pseudo_by_bucket: dict[tuple, list[int]] = {}
    for i in range(pseudo.shape[0]):
        pseudo_by_bucket.setdefault(key_of(pseudo_buckets[i]), []).append(i)
    obs_by_cell: dict[tuple, dict[int, list[int]]] = {}
    for i in range(obs.n_rows):
        key = key_of(obs_buckets[i])
        obs_by_cell.setdefault(key, {}).setdefault(int(obs.treatment[i]), []).append(i)

    bucket_keys = sorted(pseudo_by_bucket)
    tasks = [
        (
            key,
            np.asarray(pseudo_by_bucket[key]),
            {t: np.asarray(ids) for t, ids in obs_by_cell.get(key, {}).items()},
        )
        for key in bucket_keys
    ]

    def run(task):
        key, rows, cells = task
        return _match_bucket(key, rows, pseudo_norm, rct.treatment, cells, obs_norm, cfg)

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            per_bucket = list(pool.map(run, tasks))
    else:
        per_bucket = [run(t) for t in tasks]

    matches = [m for bucket in per_bucket for m in bucket]
    matches.sort(key=lambda m: (m[0], m[1], m[2]))

    prov = pd.DataFrame(
        [(str(m[0]),) + m[1:] for m in matches],
        columns=["bucket", "pseudo_index", "rank", "obs_row", "distance", "treatment"],
    )
    matched_rows = prov["obs_row"].to_numpy(dtype=np.int64) if len(prov) else np.array([], dtype=np.int64)
    fused = concat([rct, obs.subset(matched_rows)]) if len(matched_rows) else rct.subset(
        np.arange(rct.n_rows)
    )

    report = _cell_report(rct, cfg, pseudo_by_bucket, obs_by_cell, prov)
    return FusionResult(fused=fused, provenance=prov, report=report, plan=plan)


def _cell_report(rct, cfg, pseudo_by_bucket, obs_by_cell, prov) -> pd.DataFrame:
    rows = []
    for key in sorted(pseudo_by_bucket):
        pseudo_rows = pseudo_by_bucket[key]
        for t in sorted({int(rct.treatment[i]) for i in pseudo_rows}):
            n_pseudo = sum(1 for i in pseudo_rows if rct.treatment[i] == t)
            n_obs = len(obs_by_cell.get(key, {}).get(t, []))
            if len(prov):
                cell = prov[(prov["bucket"] == str(key)) & (prov["treatment"] == t)]
            else:
                cell = prov
            matched = len(cell)
            rows.append(
                {
                    "bucket": str(key),
                    "treatment": t,
                    "n_pseudo": n_pseudo,
                    "n_obs": n_obs,
                    "matched": matched,
                    "shortfall": n_pseudo * cfg.ratio - matched,
                    "mean_distance": float(cell["distance"].mean()) if matched else float("nan"),
                }
            )
    return pd.DataFrame(rows)


def random_fuse(rct: Dataset, obs: Dataset, k: int, seed: int) -> Dataset:
    """Control arm: append k*|rct| observational rows drawn uniformly without
    replacement, allocated across treatments in the RCT's group proportions."""
    if k <= 0:
        raise ValueError("fusion ratio k must be a positive integer")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 917)))
    total = k * rct.n_rows
    t_ids = rct.treatment_ids()
    group_n = np.array([(rct.treatment == t).sum() for t in t_ids], dtype=float)
    alloc = np.floor(total * group_n / group_n.sum()).astype(int)
    # distribute the rounding remainder to the largest groups, deterministically
    for i in np.argsort(-group_n)[: total - alloc.sum()]:
        alloc[i] += 1
    picks = []
    for t, n_take in zip(t_ids, alloc):
        pool = np.flatnonzero(obs.treatment == t)
        if len(pool) < n_take:
            raise ValueError(
                f"observational group {t} has {len(pool)} rows, needs {n_take}"
            )
        picks.append(rng.choice(pool, size=n_take, replace=False))
    chosen = np.sort(np.concatenate(picks))
    return concat([rct, obs.subset(chosen)])


def smd_report(dataset: Dataset, feature_indices: list[int]) -> pd.DataFrame:
    """Standardized mean differences per selected feature and treatment pair.

    SMD = |mean_i - mean_j| / pooled SD; a zero pooled SD reports 0 when the
    means agree and is flagged otherwise.
    """
    t_ids = dataset.treatment_ids()
    if len(t_ids) < 2:
        raise ValueError("need at least two treatment groups for an SMD report")
    rows = []
    for a_i, a in enumerate(t_ids):
        for b in t_ids[a_i + 1 :]:
            Xa = dataset.features[dataset.treatment == a][:, feature_indices]
            Xb = dataset.features[dataset.treatment == b][:, feature_indices]
            ma, mb = Xa.mean(axis=0), Xb.mean(axis=0)
            pooled = np.sqrt((Xa.var(axis=0, ddof=1) + Xb.var(axis=0, ddof=1)) / 2.0)
            for f_pos, f_idx in enumerate(feature_indices):
                if pooled[f_pos] > 0:
                    smd = abs(ma[f_pos] - mb[f_pos]) / pooled[f_pos]
                    flag = ""
                elif ma[f_pos] == mb[f_pos]:
                    smd, flag = 0.0, ""
                else:
                    smd, flag = float("nan"), "zero-pooled-sd"
                rows.append(
                    {
                        "pair": f"{int(a)}-{int(b)}",
                        "feature": dataset.feature_names[f_idx],
                        "smd": smd,
                        "flag": flag,
                    }
                )
    return pd.DataFrame(rows)


def smd_summary(report: pd.DataFrame) -> dict[str, float]:
    vals = report["smd"].dropna()
    return {"mean_smd": float(vals.mean()), "max_smd": float(vals.max())}
