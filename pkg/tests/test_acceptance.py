"""End-to-end acceptance suite.

Each test checks one headline claim about the shipped method at its stated
tolerance and prints a single PASS line on success (visible with -s / -rA).
The heavyweight simulation (10 repetitions, ratios 1/3/5, default generator)
runs once in a session fixture and backs the comparative criteria.
"""

import hashlib
import time

import numpy as np
import pandas as pd
import pytest
import yaml

from pseudofuse import cli, dgp, experiment, fusion, metrics, uplift
from pseudofuse.datasets import Dataset
from pseudofuse.nnindex import KdTree, brute_knn

RATIOS = (1, 3, 5)
N_REPS = 10


def _report(criterion: str, detail: str) -> None:
    print(f"PASS {criterion}: {detail}")


@pytest.fixture(scope="session")
def full_run():
    cfg = experiment.ExperimentConfig(
        dgp=dgp.default_config(n_rct=1000),
        ratios=RATIOS,
        repetitions=N_REPS,
        master_seed=0,
    )
    return experiment.run_experiment(cfg)


def _gt_means(results: pd.DataFrame, metric: str) -> pd.Series:
    gt = results[results["test_set"] == "ground_truth"]
    return gt.groupby("arm")[metric].mean()


def test_criterion_1_fused_beats_random_beats_baseline(full_run):
    res = full_run.results
    means = _gt_means(res, "w_qini")
    fused, random_, base = means["fused_3"], means["random_3"], means["baseline"]
    assert fused > random_ >= base, (fused, random_, base)
    gt = res[res["test_set"] == "ground_truth"].pivot(
        index="seed", columns="arm", values="w_qini"
    )
    wins = int((gt["fused_3"] - gt["baseline"] > 0).sum())
    assert wins >= 8, wins
    _report(
        "criterion 1 (arm ordering on unbiased test)",
        f"fused={fused:.4f} > random={random_:.4f} >= baseline={base:.4f}, "
        f"fused beats baseline in {wins}/{N_REPS} seeds",
    )


def test_criterion_2_monotone_in_ratio(full_run):
    res = full_run.results[full_run.results["test_set"] == "ground_truth"]
    arms = [f"fused_{k}" for k in RATIOS]
    qini = [res[res["arm"] == a]["w_qini"] for a in arms]
    mape = [res[res["arm"] == a]["w_mape"] for a in arms]
    q_sd = float(np.sqrt(np.mean([s.std() ** 2 for s in qini])))
    m_sd = float(np.sqrt(np.mean([s.std() ** 2 for s in mape])))
    q_means = [float(s.mean()) for s in qini]
    m_means = [float(s.mean()) for s in mape]
    for lo, hi in zip(q_means, q_means[1:]):
        assert hi >= lo - q_sd, (q_means, q_sd)
    for hi, lo in zip(m_means, m_means[1:]):
        assert lo <= hi + m_sd, (m_means, m_sd)
    _report(
        "criterion 2 (more matched data helps)",
        f"w_qini {q_means} non-decreasing, w_mape {m_means} non-increasing "
        f"within pooled sd ({q_sd:.4f}, {m_sd:.4f})",
    )


def test_criterion_3_biased_test_set_misleads(full_run):
    res = full_run.results
    fused = res[res["arm"] == "fused_3"]
    sd_biased = float(fused[fused["test_set"] == "biased"]["w_qini"].std())
    sd_gt = float(fused[fused["test_set"] == "ground_truth"]["w_qini"].std())

    def trend(test_set):
        sub = res[res["test_set"] == test_set]
        means = [float(sub[sub["arm"] == f"fused_{k}"]["w_qini"].mean()) for k in RATIOS]
        return np.sign(means[-1] - means[0])

    noisier = sd_biased > sd_gt
    disagrees = trend("biased") != trend("ground_truth")
    assert noisier or disagrees, (sd_biased, sd_gt)
    _report(
        "criterion 3 (held-out biased slice is unreliable)",
        f"w_qini sd biased={sd_biased:.4f} vs ground truth={sd_gt:.4f}"
        + (", ratio trends disagree" if disagrees else ""),
    )


def test_criterion_4_fused_mean_identity():
    # constructed case: the observational pool holds k exact copies of every
    # pseudo sample, so each fused group mean equals the overall RCT mean
    rng = np.random.default_rng(0)
    n, k = 80, 3
    rct = Dataset(
        features=rng.normal(size=(n, 2)),
        treatment=rng.integers(0, 2, n),
        outcome=rng.integers(0, 2, n),
        source=np.full(n, "rct", dtype=object),
    )
    sel = fusion.FeatureSelection(indices=[0, 1])
    plan = fusion.compute_mean_vectors(rct, sel, ratio=k)
    pseudo = fusion.build_pseudo_samples(rct, plan, sel)
    obs = Dataset(
        features=np.tile(pseudo, (k, 1)),
        treatment=np.tile(rct.treatment, k),
        outcome=np.zeros(n * k, dtype=np.int64),
        source=np.full(n * k, "obs", dtype=object),
    )
    res = fusion.fuse(rct, obs, fusion.FuseConfig(selection=sel, ratio=k))
    assert res.fused.n_rows == n * (1 + k)
    worst_exact = 0.0
    for t in res.fused.treatment_ids():
        got = res.fused.features[res.fused.treatment == t][:, sel.indices].mean(axis=0)
        worst_exact = max(worst_exact, float(np.max(np.abs(got - plan.v_avg))))
    assert worst_exact <= 1e-9, worst_exact

    # realistic case: default simulation, deviation measured in normalized units
    data = dgp.generate(dgp.default_config(n_rct=1000, seed=0))
    cfg = experiment.default_fuse_config(ratio=3)
    res2 = fusion.fuse(data.biased_rct, data.observational, cfg)
    v_avg = data.biased_rct.features[:, cfg.selection.indices].mean(axis=0)
    worst_norm = 0.0
    for t in res2.fused.treatment_ids():
        got = res2.fused.features[res2.fused.treatment == t][:, cfg.selection.indices].mean(axis=0)
        dev = np.abs(got - v_avg) / res2.plan.norm_range
        worst_norm = max(worst_norm, float(dev.max()))
    assert worst_norm <= 0.05, worst_norm
    _report(
        "criterion 4 (group means land on the overall mean)",
        f"constructed max deviation {worst_exact:.2e} <= 1e-9, "
        f"simulated normalized deviation {worst_norm:.4f} <= 0.05",
    )


def test_criterion_5_backend_checksum_equality():
    rng = np.random.default_rng(42)
    checks = []
    for trial in range(20):
        dim = int(rng.integers(2, 21))
        k = int(rng.choice([1, 3, 5]))
        m = int(rng.integers(50, 800))
        pts = rng.normal(size=(m, dim))
        weights = rng.uniform(0.5, 2.0, dim)
        tree = KdTree(pts, leaf_size=int(rng.integers(4, 40)), weights=weights)
        digest_kd, digest_brute = hashlib.sha256(), hashlib.sha256()
        for q in rng.normal(size=(10, dim)):
            for i, d in tree.query(q, k):
                digest_kd.update(f"{i}:{d!r};".encode())
            for i, d in brute_knn(q, pts, k, weights=weights):
                digest_brute.update(f"{i}:{d!r};".encode())
        assert digest_kd.hexdigest() == digest_brute.hexdigest(), (trial, dim, k)
        checks.append((dim, k))
    _report(
        "criterion 5 (backend equivalence)",
        f"20/20 random configurations produced identical result checksums "
        f"(dims {min(c[0] for c in checks)}-{max(c[0] for c in checks)})",
    )


def test_criterion_6_fusion_reduces_imbalance(full_run):
    diag = full_run.diagnostics.pivot(index="seed", columns="arm", values="mean_smd")
    improved = int((diag["fused_3"] < diag["baseline"]).sum())
    assert improved == N_REPS, diag[["baseline", "fused_3"]]
    _report(
        "criterion 6 (covariate balance restored)",
        f"mean SMD fused < biased RCT in {improved}/{N_REPS} seeds "
        f"({diag['fused_3'].mean():.3f} vs {diag['baseline'].mean():.3f})",
    )


def test_criterion_7_category_calibration():
    data = dgp.generate(dgp.default_config(n_rct=1000, seed=0))
    reference = {"Persuadable": 237, "SureThing": 183, "LostCause": 560, "SleepingDog": 20}
    counts = {c: int(np.sum(data.rct_categories == c)) for c in dgp.CATEGORIES}
    for cat, ref in reference.items():
        assert abs(counts[cat] - ref) <= 0.15 * ref, (cat, counts[cat], ref)
    _report(
        "criterion 7 (population composition)",
        f"counts per 1000 {counts} within 15% of {reference}",
    )


def test_criterion_8_metric_nulls():
    rng = np.random.default_rng(0)
    n = 10_000
    treated = rng.integers(0, 2, n).astype(bool)
    y = rng.integers(0, 2, n)
    q = metrics.qini_from_predictions(np.zeros(n), treated, y)
    assert abs(q) <= 0.02, q
    copc = metrics.group_copc(np.full(n, y.mean()), y)
    assert copc == pytest.approx(1.0, abs=1e-9)
    pred = rng.normal(0.2, 0.05, n)
    mape = metrics.group_mape(pred, float(pred.mean()))
    assert mape == 0.0
    _report(
        "criterion 8 (metric null behavior)",
        f"constant-score |qini|={abs(q):.4f} <= 0.02, calibrated copc={copc}, "
        f"exact-reference mape={mape}",
    )


def test_criterion_9_gradient_check():
    rng = np.random.default_rng(7)
    eps = 1e-6
    worst = 0.0
    for _ in range(50):
        n, d = int(rng.integers(5, 40)), int(rng.integers(1, 8))
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, n).astype(float)
        w = rng.normal(size=d)
        b = float(rng.normal())
        l2 = float(rng.uniform(0, 0.1))
        gw, gb = uplift.logistic_gradient(w, b, X, y, l2)
        analytic = np.append(gw, gb)
        numeric = np.empty(d + 1)
        for j in range(d):
            step = np.zeros(d)
            step[j] = eps
            numeric[j] = (
                uplift.logistic_loss(w + step, b, X, y, l2)
                - uplift.logistic_loss(w - step, b, X, y, l2)
            ) / (2 * eps)
        numeric[d] = (
            uplift.logistic_loss(w, b + eps, X, y, l2)
            - uplift.logistic_loss(w, b - eps, X, y, l2)
        ) / (2 * eps)
        rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8)
        worst = max(worst, float(rel.max()))
    assert worst <= 1e-5, worst
    _report(
        "criterion 9 (gradient correctness)",
        f"max relative error vs central differences {worst:.2e} <= 1e-5 over 50 instances",
    )


def test_criterion_10_kdtree_scaling():
    rng = np.random.default_rng(11)
    queries = rng.uniform(size=(20, 3))
    visits = {}
    trees = {}
    for m in (10_000, 100_000, 1_000_000):
        tree = KdTree(rng.uniform(size=(m, 3)), leaf_size=32)
        tree.reset_visits()
        for q in queries:
            tree.query(q, k=3)
        visits[m] = tree.visits / len(queries)
        trees[m] = tree
    # node visits must grow far slower than the point count
    assert visits[1_000_000] / visits[10_000] < 0.1 * 100, visits
    big = trees[1_000_000]
    pts = big.points
    start = time.perf_counter()
    for q in queries:
        big.query(q, k=3)
    kd_time = time.perf_counter() - start
    start = time.perf_counter()
    for q in queries:
        brute_knn(q, pts, k=3)
    brute_time = time.perf_counter() - start
    assert kd_time * 10 <= brute_time, (kd_time, brute_time)
    _report(
        "criterion 10 (query complexity)",
        f"mean visits {visits}, kd {kd_time:.3f}s vs brute {brute_time:.3f}s at 1e6 points",
    )


def test_criterion_11_thread_invariance(tmp_path):
    cfg = {
        "dgp": {"n_rct": 150, "obs_multiplier": 5, "ground_truth_multiplier": 5},
        "experiment": {"ratios": [1, 3], "repetitions": 3},
        "fusion": {"features": ["x_0", "x_1", "x_4"]},
    }
    cfg_path = tmp_path / "exp.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg))
    dirs = []
    for threads in ("1", "2"):
        out = tmp_path / f"t{threads}"
        rc = cli.main(
            [
                "experiment",
                "--config",
                str(cfg_path),
                "--threads",
                threads,
                "--out-dir",
                str(out),
            ]
        )
        assert rc == 0
        dirs.append(out)
    for name in ("results.csv", "diagnostics.csv", "summary.csv"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name
    _report(
        "criterion 11 (thread-count invariance)",
        "results.csv, diagnostics.csv and summary.csv byte-identical for --threads 1 vs 2",
    )
