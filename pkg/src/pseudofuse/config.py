"""YAML config loading for the generator, fusion, and experiment driver.

Schema (all keys optional unless noted; omitted keys take the shipped
defaults):

    dgp:
      n_rct: 1000
      obs_multiplier: 100
      ground_truth_multiplier: 100
      seed: 0
      covariates:            # list of dimension specs
        - {kind: normal, mu: 0.0, sigma: 1.0}
        - {kind: linear, refs: [0], coeffs: [0.5], noise_sd: 0.2}
      outcome:
        a: 0.0
        b: 0.8
        c: {0: 0.3, 1: 0.4, 2: -2.0}   # sparse index -> value maps
        d: {6: 0.2}
        e: {0: 0.8, 4: 0.15}
        g: {1: 0.3}
        mu: 1.2
      rct_bias: {region_column: 0, threshold: 0.0, magnitude: 0.1}
      obs_bias: {region_column: 0, threshold: 0.0, magnitude: 0.35}
    fusion:
      features: [x_0, x_1, x_4, x_16, x_18]   # names or indices
      weights: [1, 1, 1, 1, 1]
      buckets: "x_2:discrete"                 # or e.g. "x_0:-0.5/0.5,x_2:discrete"
      backend: kdtree
      max_distance: null
      replacement: without
    experiment:
      ratios: [1, 3, 5]
      repetitions: 10
      test_fraction: 0.2
      master_seed: 0
      learner: {learning_rate: 0.5, l2: 0.001, max_epochs: 2000}
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from . import dgp, fusion, uplift
from .experiment import ExperimentConfig


def _sparse_vector(spec, n_dims: int) -> np.ndarray:
    v = np.zeros(n_dims)
    if spec is None:
        return v
    if isinstance(spec, dict):
        for idx, val in spec.items():
            v[int(idx)] = float(val)
        return v
    arr = np.asarray(spec, dtype=np.float64)
    if arr.shape != (n_dims,):
        raise dgp.ConfigError(f"coefficient vector length {arr.shape} != {n_dims}")
    return arr


def dgp_config_from_dict(raw: dict) -> dgp.DgpConfig:
    base = dgp.default_config()
    if "covariates" in raw:
        dims = [
            dgp.DimensionSpec(d.pop("kind"), dict(d)) for d in [dict(d) for d in raw["covariates"]]
        ]
        cov = dgp.CovariateSpec(dims)
    else:
        cov = base.covariates
    n_dims = cov.n_dims
    if "outcome" in raw:
        o = raw["outcome"]
        outcome = dgp.OutcomeModelSpec(
            a=float(o.get("a", 0.0)),
            b=float(o.get("b", 0.0)),
            c=_sparse_vector(o.get("c"), n_dims),
            d=_sparse_vector(o.get("d"), n_dims),
            e=_sparse_vector(o.get("e"), n_dims),
            g=_sparse_vector(o.get("g"), n_dims),
            mu=float(o.get("mu", 0.0)),
        )
    else:
        outcome = base.outcome

    def bias(key: str, default: dgp.SelectionBiasSpec) -> dgp.SelectionBiasSpec:
        if key not in raw:
            return default
        b = raw[key]
        return dgp.SelectionBiasSpec(
            region_column=int(b.get("region_column", 0)),
            threshold=float(b.get("threshold", 0.0)),
            magnitude=float(b["magnitude"]),
            n_treatments=int(b.get("n_treatments", 2)),
        )

    return dgp.DgpConfig(
        covariates=cov,
        outcome=outcome,
        rct_bias=bias("rct_bias", base.rct_bias),
        obs_bias=bias("obs_bias", base.obs_bias),
        n_rct=int(raw.get("n_rct", 1000)),
        obs_multiplier=int(raw.get("obs_multiplier", 100)),
        ground_truth_multiplier=int(raw.get("ground_truth_multiplier", 100)),
        seed=int(raw.get("seed", 0)),
    )


def _feature_index(name, feature_names: list[str] | None) -> int:
    if isinstance(name, int):
        return name
    if feature_names and name in feature_names:
        return feature_names.index(name)
    if isinstance(name, str) and name.startswith("x_"):
        return int(name[2:])
    raise ValueError(f"unknown feature {name!r}")


def parse_bucket_spec(text: str, feature_names: list[str] | None = None) -> fusion.BucketSpec:
    """Parse e.g. "x_2:discrete,x_0:-0.5/0.0/0.5" into a BucketSpec."""
    columns: list[int] = []
    edges: dict[int, list[float] | None] = {}
    if not text:
        return fusion.BucketSpec()
    for part in text.split(","):
        name, _, rule = part.partition(":")
        col = _feature_index(name.strip(), feature_names)
        columns.append(col)
        rule = rule.strip()
        edges[col] = None if rule in ("", "discrete") else [float(v) for v in rule.split("/")]
    return fusion.BucketSpec(columns=columns, edges=edges)


def fuse_config_from_dict(raw: dict, feature_names: list[str] | None = None) -> fusion.FuseConfig:
    features = raw.get("features", ["x_0", "x_1", "x_4", "x_16", "x_18"])
    indices = [_feature_index(f, feature_names) for f in features]
    weights = raw.get("weights")
    buckets = raw.get("buckets", "x_2:discrete")
    if isinstance(buckets, str):
        buckets = parse_bucket_spec(buckets, feature_names)
    max_distance = raw.get("max_distance")
    return fusion.FuseConfig(
        selection=fusion.FeatureSelection(
            indices=indices,
            weights=None if weights is None else np.asarray(weights, dtype=np.float64),
        ),
        buckets=buckets,
        ratio=int(raw.get("ratio", 3)),
        backend=raw.get("backend", "kdtree"),
        metric=raw.get("metric", "l2"),
        max_distance=None if max_distance is None else float(max_distance),
        replacement=raw.get("replacement", "without") in ("with", True),
        n_jobs=int(raw.get("n_jobs", 1)),
    )


def experiment_config_from_dict(raw: dict) -> ExperimentConfig:
    exp = raw.get("experiment", {})
    learner_raw = exp.get("learner", {})
    learner = uplift.TrainConfig(
        learning_rate=float(learner_raw.get("learning_rate", 0.5)),
        l2=float(learner_raw.get("l2", 1e-3)),
        max_epochs=int(learner_raw.get("max_epochs", 2000)),
        grad_tol=float(learner_raw.get("grad_tol", 1e-7)),
        seed=int(learner_raw.get("seed", 0)),
    )
    return ExperimentConfig(
        dgp=dgp_config_from_dict(raw.get("dgp", {})),
        ratios=tuple(exp.get("ratios", (1, 3, 5))),
        repetitions=int(exp.get("repetitions", 10)),
        test_fraction=float(exp.get("test_fraction", 0.2)),
        learner=learner,
        fuse_template=fuse_config_from_dict(raw.get("fusion", {})),
        master_seed=int(exp.get("master_seed", 0)),
    )


def load_yaml(path: str | Path) -> dict:
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    return data or {}
