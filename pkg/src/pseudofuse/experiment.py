"""End-to-end experiment: generate, fuse at several ratios, train, evaluate.

For every repetition the biased RCT is split 80/20; the baseline trains on the
80% split, the fused and random-control arms train on that split augmented at
each configured ratio, and every model is evaluated on both the held-out
biased 20% and the large unbiased ground-truth set. Results aggregate to
mean and standard deviation across repetitions.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from . import dgp, fusion, metrics, uplift
from .datasets import Dataset

# sub-stream codes for seed derivation
_SPLIT, _RANDOM_FUSE = 11, 12


def derive_seed(master: int, *parts: int) -> int:
    return int(np.random.SeedSequence((master, *parts)).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    dgp: dgp.DgpConfig
    ratios: tuple[int, ...] = (1, 3, 5)
    repetitions: int = 10
    test_fraction: float = 0.2
    learner: uplift.TrainConfig = field(default_factory=uplift.TrainConfig)
    fuse_template: fusion.FuseConfig | None = None
    master_seed: int = 0

    def validate(self) -> None:
        if any(k <= 0 for k in self.ratios):
            raise ValueError("fusion ratios must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not (0.0 < self.test_fraction < 1.0):
            raise ValueError("test fraction must be in (0, 1)")


def default_fuse_config(ratio: int = 3, backend: str = "kdtree") -> fusion.FuseConfig:
    """Matching setup for the shipped simulation: match on the informative
    continuous features, bucket on the effect-flipping flag."""
    return fusion.FuseConfig(
        selection=fusion.FeatureSelection(indices=[0, 1, 4, 16, 18]),
        buckets=fusion.BucketSpec(columns=[2], edges={2: None}),
        ratio=ratio,
        backend=backend,
    )


def evaluate_model(model: uplift.TLearnerModel, ds: Dataset) -> metrics.MetricsReport:
    """Per-treatment metrics versus control, aggregated with size weights."""
    groups = []
    control_mask = ds.treatment == uplift.CONTROL
    for t in model.treatments():
        if t == uplift.CONTROL or not np.any(ds.treatment == t):
            continue
        pair = control_mask | (ds.treatment == t)
        X = ds.features[pair]
        y = ds.outcome[pair]
        treated = ds.treatment[pair] == t
        pred_uplift = model.predict_uplift(t, X)
        pred_prob = np.where(
            treated, model.predict_outcome(t, X), model.predict_outcome(uplift.CONTROL, X)
        )
        tu = ds.true_uplift[pair] if ds.true_uplift is not None else None
        groups.append(
            metrics.evaluate_group(t, treated, y, pred_uplift, pred_prob, true_uplift=tu)
        )
    return metrics.weighted_report(groups)


def split_train_test(
    ds: Dataset, test_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n_rows)
    n_test = int(round(ds.n_rows * test_fraction))
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))


def _run_rep(cfg: ExperimentConfig, rep: int) -> tuple[list[dict], list[dict]]:
    dgp_cfg = replace(cfg.dgp, seed=derive_seed(cfg.master_seed, rep, 1))
    data = dgp.generate(dgp_cfg)
    train_rct, test_rct = split_train_test(
        data.biased_rct, cfg.test_fraction, derive_seed(cfg.master_seed, rep, _SPLIT)
    )
    template = cfg.fuse_template or default_fuse_config()
    sel = template.selection.indices

    arms: dict[str, tuple[Dataset, int]] = {"baseline": (train_rct, 0)}
    for k in cfg.ratios:
        fused = fusion.fuse(train_rct, data.observational, replace(template, ratio=k))
        arms[f"fused_{k}"] = (fused.fused, k)
        rnd = fusion.random_fuse(
            train_rct,
            data.observational,
            k,
            derive_seed(cfg.master_seed, rep, _RANDOM_FUSE, k),
        )
        arms[f"random_{k}"] = (rnd, k)

    results, diagnostics = [], []
    for arm, (train_ds, ratio) in arms.items():
        model = uplift.fit(train_ds, cfg.learner)
        for test_name, test_ds in (("biased", test_rct), ("ground_truth", data.ground_truth)):
            report = evaluate_model(model, test_ds)
            results.append(
                {
                    "seed": rep,
                    "arm": arm,
                    "ratio": ratio,
                    "test_set": test_name,
                    "w_qini": report.w_qini,
                    "w_mape": report.w_mape,
                    "w_copc": report.w_copc,
                    "coverage": report.coverage,
                    "n_test": test_ds.n_rows,
                }
            )
        smd = fusion.smd_summary(fusion.smd_report(train_ds, sel))
        diagnostics.append({"seed": rep, "arm": arm, "ratio": ratio, **smd})
    return results, diagnostics


@dataclass
class ExperimentResult:
    results: pd.DataFrame
    diagnostics: pd.DataFrame

    def summary(self) -> pd.DataFrame:
        g = self.results.groupby(["arm", "ratio", "test_set"], sort=True)
        out = g[["w_qini", "w_mape", "w_copc"]].agg(["mean", "std"])
        out.columns = [f"{m}_{s}" for m, s in out.columns]
        return out.reset_index()


def run_experiment(cfg: ExperimentConfig, n_jobs: int = 1) -> ExperimentResult:
    cfg.validate()
    reps = range(cfg.repetitions)
    if n_jobs > 1:
        # repetitions are independent; processes sidestep the GIL-bound
        # matching loop, and in-order collection keeps output deterministic
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            per_rep = list(pool.map(_run_rep, [cfg] * cfg.repetitions, reps))
    else:
        per_rep = [_run_rep(cfg, r) for r in reps]
    results = pd.DataFrame([row for res, _ in per_rep for row in res])
    diagnostics = pd.DataFrame([row for _, diag in per_rep for row in diag])
    return ExperimentResult(results=results, diagnostics=diagnostics)
