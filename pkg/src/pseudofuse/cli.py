"""Command-line entry points.

Subcommands compose via files: `generate` writes the three dataset CSVs,
`fuse` augments an RCT CSV from an observational CSV, `train` fits the uplift
model, `evaluate` scores a model file on a dataset, `experiment` runs the full
multi-seed comparison, and `report` renders summary CSV and figures from the
experiment's per-seed results.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pandas as pd

from . import config as cfgmod
from . import datasets, dgp, experiment, fusion, metrics, report, uplift

log = logging.getLogger("pseudofuse")


@contextmanager
def _stage(name: str):
    start = time.perf_counter()
    yield
    log.info("%s finished in %.2fs", name, time.perf_counter() - start)


def cmd_generate(args: argparse.Namespace) -> int:
    raw = cfgmod.load_yaml(args.config) if args.config else {}
    cfg = cfgmod.dgp_config_from_dict(raw.get("dgp", raw))
    if args.n_rct is not None:
        cfg.n_rct = args.n_rct
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with _stage("generate"):
        data = dgp.generate(cfg)
    data.biased_rct.to_csv(out / "rct.csv")
    data.observational.to_csv(out / "obs.csv")
    data.ground_truth.to_csv(out / "gt.csv")
    counts = pd.Series(data.rct_categories).value_counts()
    log.info("RCT category counts: %s", counts.to_dict())
    return 0


def cmd_fuse(args: argparse.Namespace) -> int:
    rct = datasets.read_csv(args.rct)
    obs = datasets.read_csv(args.obs)
    raw = {
        "ratio": args.ratio,
        "backend": args.backend,
        "replacement": args.replacement,
        "max_distance": args.max_distance,
    }
    if args.features:
        raw["features"] = [f.strip() for f in args.features.split(",")]
    if args.weights:
        raw["weights"] = [float(w) for w in args.weights.split(",")]
    if args.buckets is not None:
        raw["buckets"] = args.buckets
    cfg = cfgmod.fuse_config_from_dict(raw, feature_names=rct.feature_names)
    with _stage("fuse"):
        result = fusion.fuse(rct, obs, cfg)
    result.fused.to_csv(args.out)
    if args.report:
        result.report.to_csv(args.report, index=False)
    shortfall = int(result.report["shortfall"].sum()) if len(result.report) else 0
    log.info(
        "fused %d RCT rows with %d matches (%d shortfall)",
        rct.n_rows,
        len(result.provenance),
        shortfall,
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    train = datasets.read_csv(args.data)
    cfg = uplift.TrainConfig(
        learning_rate=args.learning_rate,
        l2=args.l2,
        max_epochs=args.epochs,
        seed=args.seed,
    )
    with _stage("train"):
        model = uplift.fit(train, cfg)
    model.save(args.out)
    for line in model.training_log:
        log.info("%s", line)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = uplift.TLearnerModel.load(args.model)
    ds = datasets.read_csv(args.data)
    with _stage("evaluate"):
        rep = experiment.evaluate_model(model, ds)
    rep.to_frame().to_csv(args.out, index=False)
    if args.curves:
        _write_curves(model, ds, Path(args.curves))
    log.info(
        "w_qini=%.4f w_mape=%s w_copc=%.4f",
        rep.w_qini,
        "n/a" if rep.w_mape is None else f"{rep.w_mape:.4f}",
        rep.w_copc,
    )
    return 0


def _write_curves(model: uplift.TLearnerModel, ds: datasets.Dataset, path: Path) -> None:
    rows = []
    control = ds.treatment == uplift.CONTROL
    for t in model.treatments():
        if t == uplift.CONTROL or not np.any(ds.treatment == t):
            continue
        pair = control | (ds.treatment == t)
        curve = metrics.qini_curve(
            model.predict_uplift(t, ds.features[pair]),
            ds.treatment[pair] == t,
            ds.outcome[pair],
        )
        for phi, gain in curve:
            rows.append({"treatment": t, "fraction": phi, "gain": gain})
    pd.DataFrame(rows).to_csv(path, index=False)


def cmd_experiment(args: argparse.Namespace) -> int:
    raw = cfgmod.load_yaml(args.config) if args.config else {}
    cfg = cfgmod.experiment_config_from_dict(raw)
    if args.seed is not None:
        cfg.master_seed = args.seed
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with _stage("experiment"):
        result = experiment.run_experiment(cfg, n_jobs=args.threads)
    result.results.to_csv(out / "results.csv", index=False)
    result.diagnostics.to_csv(out / "diagnostics.csv", index=False)
    result.summary().to_csv(out / "summary.csv", index=False)
    log.info("wrote %s", out / "results.csv")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    results = pd.read_csv(args.results)
    with _stage("report"):
        paths = report.render_report(results, args.out_dir)
    for p in paths:
        log.info("wrote %s", p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudofuse",
        description="Pseudo-sample matching data fusion for biased RCTs",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate synthetic RCT/obs/ground-truth CSVs")
    g.add_argument("--config", help="YAML config (dgp section)")
    g.add_argument("--n-rct", type=int, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fuse", help="augment an RCT CSV with matched observational rows")
    f.add_argument("--rct", required=True)
    f.add_argument("--obs", required=True)
    f.add_argument("--ratio", type=int, default=3)
    f.add_argument("--features", help="comma-separated feature names")
    f.add_argument("--buckets", help='bucket spec, e.g. "x_2:discrete,x_0:-0.5/0.5"')
    f.add_argument("--weights", help="comma-separated feature weights")
    f.add_argument("--backend", choices=("brute", "kdtree"), default="kdtree")
    f.add_argument("--max-distance", type=float, default=None)
    f.add_argument("--replacement", choices=("with", "without"), default="without")
    f.add_argument("--seed", type=int, default=0)  # reserved; matching is deterministic
    f.add_argument("--out", required=True)
    f.add_argument("--report", help="per-cell fusion report CSV")
    f.set_defaults(func=cmd_fuse)

    t = sub.add_parser("train", help="fit the T-learner uplift model")
    t.add_argument("--data", required=True)
    t.add_argument("--learning-rate", type=float, default=0.5)
    t.add_argument("--l2", type=float, default=1e-3)
    t.add_argument("--epochs", type=int, default=2000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a model file on a dataset CSV")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--curves", help="optional Qini curve CSV")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="run the full multi-seed comparison")
    x.add_argument("--config", help="YAML config")
    x.add_argument("--seed", type=int, default=None, help="master seed override")
    x.add_argument("--threads", type=int, default=1)
    x.add_argument("--out-dir", required=True)
    x.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", help="summary CSV and figures from results.csv")
    r.add_argument("--results", required=True)
    r.add_argument("--out-dir", required=True)
    r.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
