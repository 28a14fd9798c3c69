"""Synthetic data generator: biased RCT, observational pool, unbiased ground truth.

Covariates mix binomial / Poisson / normal / uniform / bimodal columns plus
(non)linear combinations of earlier columns. The outcome is a thresholded
latent score with standard-normal noise, so every sample has a closed-form
outcome probability and true uplift. Treatment assignment probabilities depend
on a designated covariate region, with a larger bias magnitude for the
observational pool than for the biased RCT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset

CATEGORIES = ("Persuadable", "SureThing", "LostCause", "SleepingDog")

# sub-stream codes so each (dataset tag, purpose) gets an independent stream
_STREAM = {"rct": 1, "obs": 2, "gt": 3}
_PURPOSE = {"covariates": 1, "assignment": 2, "noise": 3}


class ConfigError(ValueError):
    """Invalid generator configuration."""


@dataclass
class DimensionSpec:
    """One covariate column: a base distribution or a combination of earlier ones.

    kind: binomial(n, p) | poisson(lam) | normal(mu, sigma) | uniform(lo, hi)
        | bimodal(mu1, s1, mu2, s2, w) | linear(refs, coeffs, noise_sd)
        | nonlinear(refs, coeffs, noise_sd)  -- tanh of each referenced column
    """

    kind: str
    params: dict = field(default_factory=dict)

    def validate(self, index: int) -> None:
        p = self.params
        try:
            if self.kind == "binomial":
                if not (0.0 <= p["p"] <= 1.0) or int(p["n"]) < 1:
                    raise ConfigError(f"dimension {index}: binomial needs n>=1, 0<=p<=1")
            elif self.kind == "poisson":
                if p["lam"] <= 0:
                    raise ConfigError(f"dimension {index}: poisson rate must be > 0")
            elif self.kind == "normal":
                if p["sigma"] < 0:
                    raise ConfigError(f"dimension {index}: normal sigma must be >= 0")
            elif self.kind == "uniform":
                if p["lo"] > p["hi"]:
                    raise ConfigError(f"dimension {index}: uniform needs lo <= hi")
            elif self.kind == "bimodal":
                if p["s1"] < 0 or p["s2"] < 0 or not (0.0 <= p["w"] <= 1.0):
                    raise ConfigError(f"dimension {index}: bimodal needs s>=0, 0<=w<=1")
            elif self.kind in ("linear", "nonlinear"):
                refs = list(p["refs"])
                if len(refs) != len(list(p["coeffs"])):
                    raise ConfigError(f"dimension {index}: refs/coeffs length mismatch")
                if any(r >= index or r < 0 for r in refs):
                    raise ConfigError(
                        f"dimension {index}: combinations may only reference lower-indexed columns"
                    )
                if p.get("noise_sd", 0.0) < 0:
                    raise ConfigError(f"dimension {index}: noise_sd must be >= 0")
            else:
                raise ConfigError(f"dimension {index}: unknown distribution kind {self.kind!r}")
        except KeyError as exc:
            raise ConfigError(f"dimension {index}: missing parameter {exc}") from exc


@dataclass
class CovariateSpec:
    dims: list[DimensionSpec]

    def validate(self) -> None:
        if not self.dims:
            raise ConfigError("covariate spec needs at least one dimension")
        for i, d in enumerate(self.dims):
            d.validate(i)

    @property
    def n_dims(self) -> int:
        return len(self.dims)


@dataclass
class OutcomeModelSpec:
    """Latent score a + b*t + t*(c.x + d.x^2) + e.x + g.x^2, thresholded at mu."""

    a: float
    b: float
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    g: np.ndarray
    mu: float

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=np.float64)
        self.d = np.asarray(self.d, dtype=np.float64)
        self.e = np.asarray(self.e, dtype=np.float64)
        self.g = np.asarray(self.g, dtype=np.float64)

    def validate(self, n_dims: int) -> None:
        for name, v in (("c", self.c), ("d", self.d), ("e", self.e), ("g", self.g)):
            if v.shape != (n_dims,):
                raise ConfigError(f"coefficient vector {name} must have length {n_dims}")


@dataclass
class SelectionBiasSpec:
    """Region-dependent assignment probabilities.

    Regions are defined by thresholding one designated covariate: region 0 is
    below the threshold, region 1 at or above it. `magnitude` shifts the
    treated-arm probability by +/- magnitude across the two regions.
    """

    region_column: int
    threshold: float
    magnitude: float
    n_treatments: int = 2

    def validate(self) -> None:
        if not (0.0 <= self.magnitude < 0.5):
            raise ConfigError("bias magnitude must be in [0, 0.5)")
        if self.n_treatments < 2:
            raise ConfigError("need at least a control and one treatment")

    def probabilities(self, region: int) -> np.ndarray:
        """Assignment probability vector for a region; rows sum to 1."""
        base = np.full(self.n_treatments, 1.0 / self.n_treatments)
        shift = self.magnitude if region == 1 else -self.magnitude
        # spread the treated-arm shift evenly over the non-control arms
        base[0] -= shift
        base[1:] += shift / (self.n_treatments - 1)
        if np.any(base < 0):
            raise ConfigError("bias magnitude incompatible with treatment count")
        return base

    def regions(self, features: np.ndarray) -> np.ndarray:
        if self.region_column >= features.shape[1]:
            raise ConfigError(f"region column {self.region_column} out of range")
        return (features[:, self.region_column] >= self.threshold).astype(np.int64)


@dataclass
class DgpConfig:
    covariates: CovariateSpec
    outcome: OutcomeModelSpec
    rct_bias: SelectionBiasSpec
    obs_bias: SelectionBiasSpec
    n_rct: int
    obs_multiplier: int = 100
    ground_truth_multiplier: int = 100
    seed: int = 0

    def validate(self) -> None:
        self.covariates.validate()
        self.outcome.validate(self.covariates.n_dims)
        self.rct_bias.validate()
        self.obs_bias.validate()
        if self.n_rct < 1 or self.obs_multiplier < 1 or self.ground_truth_multiplier < 1:
            raise ConfigError("dataset sizes must be >= 1")
        if self.obs_bias.magnitude <= self.rct_bias.magnitude:
            raise ConfigError(
                "observational bias magnitude must exceed the biased-RCT magnitude"
            )


def _rng(seed: int, tag: str, purpose: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((seed, _STREAM[tag], _PURPOSE[purpose]))
    )


def gen_covariates(spec: CovariateSpec, n: int, seed: int, tag: str = "rct") -> np.ndarray:
    """Sample an (n, j) covariate matrix; deterministic per (spec, n, seed, tag)."""
    spec.validate()
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = _rng(seed, tag, "covariates")
    X = np.empty((n, spec.n_dims), dtype=np.float64)
    for i, dim in enumerate(spec.dims):
        p = dim.params
        if dim.kind == "binomial":
            X[:, i] = rng.binomial(int(p["n"]), p["p"], size=n)
        elif dim.kind == "poisson":
            X[:, i] = rng.poisson(p["lam"], size=n)
        elif dim.kind == "normal":
            X[:, i] = rng.normal(p["mu"], p["sigma"], size=n)
        elif dim.kind == "uniform":
            X[:, i] = rng.uniform(p["lo"], p["hi"], size=n)
        elif dim.kind == "bimodal":
            pick = rng.random(n) < p["w"]
            X[:, i] = np.where(
                pick,
                rng.normal(p["mu1"], p["s1"], size=n),
                rng.normal(p["mu2"], p["s2"], size=n),
            )
        else:
            refs = list(p["refs"])
            coeffs = np.asarray(list(p["coeffs"]), dtype=np.float64)
            base = X[:, refs]
            if dim.kind == "nonlinear":
                base = np.tanh(base)
            X[:, i] = base @ coeffs
            sd = p.get("noise_sd", 0.0)
            if sd > 0:
                X[:, i] += rng.normal(0.0, sd, size=n)
    return X


def outcome_score(x: np.ndarray, t: int, spec: OutcomeModelSpec) -> float | np.ndarray:
    """Deterministic latent score for covariates x under treatment t.

    Accepts a single vector or an (n, j) matrix; t may be scalar or per-row.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != spec.e.shape[0]:
        raise ConfigError(
            f"covariate dimension {X.shape[1]} != coefficient dimension {spec.e.shape[0]}"
        )
    t_arr = np.asarray(t, dtype=np.float64)
    X2 = X**2
    score = (
        spec.a
        + spec.b * t_arr
        + t_arr * (X @ spec.c + X2 @ spec.d)
        + X @ spec.e
        + X2 @ spec.g
    )
    return float(score[0]) if single else score


def true_outcome_prob(x: np.ndarray, t: int, spec: OutcomeModelSpec) -> float | np.ndarray:
    """P(Y=1 | x, t) = Phi(score - mu), exact under the standard-normal noise."""
    z = np.asarray(outcome_score(x, t, spec)) - spec.mu
    p = 0.5 * (1.0 + _erf_vec(z / math.sqrt(2.0)))
    return float(p) if p.ndim == 0 else p


_erf_vec = np.vectorize(math.erf, otypes=[np.float64])


def true_uplift(x: np.ndarray, spec: OutcomeModelSpec, t: int = 1) -> float | np.ndarray:
    return true_outcome_prob(x, t, spec) - true_outcome_prob(x, 0, spec)


def sample_outcome(
    x: np.ndarray, t: int, spec: OutcomeModelSpec, rng: np.random.Generator
) -> int | np.ndarray:
    """Binary outcome: 1 iff score + noise > mu (ties resolve to 0)."""
    score = np.asarray(outcome_score(x, t, spec))
    noise = rng.standard_normal(score.shape)
    y = (score + noise > spec.mu).astype(np.int64)
    return int(y) if y.ndim == 0 else y


def assign_treatment(
    features: np.ndarray, spec: SelectionBiasSpec, rng: np.random.Generator
) -> np.ndarray:
    """Draw a treatment id per row from the row's region probability vector."""
    regions = spec.regions(features)
    probs = np.stack([spec.probabilities(r) for r in (0, 1)])
    u = rng.random(features.shape[0])
    cum = np.cumsum(probs, axis=1)
    return (u[:, None] > cum[regions][:, :-1]).sum(axis=1).astype(np.int64)


def assign_uniform(n: int, n_treatments: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, n_treatments, size=n, dtype=np.int64)


def classify_category(y1: np.ndarray, y0: np.ndarray) -> np.ndarray:
    """Four-quadrant label from the joint potential outcomes (Y(1), Y(0))."""
    out = np.empty(np.shape(y1), dtype=object)
    out[(y1 == 1) & (y0 == 0)] = "Persuadable"
    out[(y1 == 1) & (y0 == 1)] = "SureThing"
    out[(y1 == 0) & (y0 == 0)] = "LostCause"
    out[(y1 == 0) & (y0 == 1)] = "SleepingDog"
    return out


def _generate_one(
    config: DgpConfig, tag: str, n: int, uniform_assignment: bool
) -> tuple[Dataset, np.ndarray]:
    X = gen_covariates(config.covariates, n, config.seed, tag=tag)
    n_t = config.rct_bias.n_treatments
    arng = _rng(config.seed, tag, "assignment")
    if uniform_assignment:
        t = assign_uniform(n, n_t, arng)
    else:
        bias = config.rct_bias if tag == "rct" else config.obs_bias
        t = assign_treatment(X, bias, arng)
    # one shared noise draw per sample: the same delta realizes every
    # potential outcome, so category labels and observed outcomes agree
    noise = _rng(config.seed, tag, "noise").standard_normal(n)
    scores = np.stack(
        [np.asarray(outcome_score(X, ti, config.outcome)) for ti in range(n_t)]
    )
    potentials = (scores + noise > config.outcome.mu).astype(np.int64)
    y = potentials[t, np.arange(n)]
    uplift = np.asarray(true_uplift(X, config.outcome))
    ds = Dataset(
        features=X,
        treatment=t,
        outcome=y,
        source=np.full(n, tag, dtype=object),
        true_uplift=uplift,
    )
    categories = classify_category(potentials[min(1, n_t - 1)], potentials[0])
    return ds, categories


@dataclass
class GeneratedData:
    biased_rct: Dataset
    observational: Dataset
    ground_truth: Dataset
    rct_categories: np.ndarray
    obs_categories: np.ndarray


def generate(config: DgpConfig) -> GeneratedData:
    """Produce the biased RCT, observational, and unbiased ground-truth sets."""
    config.validate()
    rct, rct_cat = _generate_one(config, "rct", config.n_rct, uniform_assignment=False)
    obs, obs_cat = _generate_one(
        config, "obs", config.n_rct * config.obs_multiplier, uniform_assignment=False
    )
    gt, _ = _generate_one(
        config, "gt", config.n_rct * config.ground_truth_multiplier, uniform_assignment=True
    )
    return GeneratedData(
        biased_rct=rct,
        observational=obs,
        ground_truth=gt,
        rct_categories=rct_cat,
        obs_categories=obs_cat,
    )


def default_config(n_rct: int = 1000, seed: int = 0, **overrides) -> DgpConfig:
    """Shipped 20-dimensional configuration.

    Calibrated so the four joint-potential-outcome categories land near
    237 / 183 / 560 / 20 per 1000 samples.
    """
    dims = [
        DimensionSpec("normal", {"mu": 0.0, "sigma": 1.0}),
        DimensionSpec("uniform", {"lo": 0.0, "hi": 1.0}),
        DimensionSpec("binomial", {"n": 1, "p": 0.24}),
        DimensionSpec("poisson", {"lam": 3.0}),
        DimensionSpec("bimodal", {"mu1": -2.0, "s1": 1.0, "mu2": 2.0, "s2": 1.0, "w": 0.5}),
        DimensionSpec("normal", {"mu": 0.0, "sigma": 1.0}),
        DimensionSpec("uniform", {"lo": -1.0, "hi": 1.0}),
        DimensionSpec("binomial", {"n": 1, "p": 0.5}),
        DimensionSpec("poisson", {"lam": 1.0}),
        DimensionSpec("normal", {"mu": 1.0, "sigma": 2.0}),
        DimensionSpec("normal", {"mu": 0.0, "sigma": 1.0}),
        DimensionSpec("uniform", {"lo": 0.0, "hi": 2.0}),
        DimensionSpec("binomial", {"n": 3, "p": 0.4}),
        DimensionSpec("normal", {"mu": -1.0, "sigma": 0.5}),
        DimensionSpec("uniform", {"lo": 0.0, "hi": 1.0}),
        DimensionSpec("bimodal", {"mu1": 0.0, "s1": 0.5, "mu2": 3.0, "s2": 0.8, "w": 0.3}),
        DimensionSpec("linear", {"refs": [0, 1], "coeffs": [0.5, 0.3], "noise_sd": 0.2}),
        DimensionSpec("linear", {"refs": [5, 6], "coeffs": [0.7, -0.4], "noise_sd": 0.3}),
        DimensionSpec("nonlinear", {"refs": [0, 4], "coeffs": [1.0, 0.5], "noise_sd": 0.2}),
        DimensionSpec("nonlinear", {"refs": [1, 7], "coeffs": [0.8, 0.6], "noise_sd": 0.1}),
    ]
    j = len(dims)
    c = np.zeros(j)
    c[[0, 1, 2]] = [0.3, 0.4, -2.0]
    d = np.zeros(j)
    d[6] = 0.2
    e = np.zeros(j)
    e[[0, 4]] = [0.8, 0.15]
    g = np.zeros(j)
    g[[0, 1]] = [0.3, 0.3]
    outcome = OutcomeModelSpec(a=0.0, b=0.95, c=c, d=d, e=e, g=g, mu=1.45)
    cfg = DgpConfig(
        covariates=CovariateSpec(dims),
        outcome=outcome,
        rct_bias=SelectionBiasSpec(region_column=0, threshold=0.0, magnitude=0.1),
        obs_bias=SelectionBiasSpec(region_column=0, threshold=0.0, magnitude=0.42),
        n_rct=n_rct,
        seed=seed,
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg
