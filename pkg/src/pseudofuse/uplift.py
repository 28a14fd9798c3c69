"""T-learner uplift model: one L2-regularized logistic model per treatment.

Each sub-model is fitted with full-batch gradient descent on standardized
features. Groups with a single outcome class fall back to a Laplace-smoothed
constant predictor. Uplift for treatment t is the predicted outcome
probability under t minus the prediction under control (treatment 0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import Dataset

CONTROL = 0


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class TrainConfig:
    learning_rate: float = 0.5
    l2: float = 1e-3
    max_epochs: int = 2000
    grad_tol: float = 1e-7
    seed: int = 0


def logistic_loss(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
) -> float:
    z = X @ w + b
    # log(1 + exp(-z*s)) computed stably via logaddexp
    s = np.where(y == 1, 1.0, -1.0)
    return float(np.mean(np.logaddexp(0.0, -s * z)) + 0.5 * l2 * np.dot(w, w))


def logistic_gradient(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[np.ndarray, float]:
    p = sigmoid(X @ w + b)
    r = p - y
    return X.T @ r / len(y) + l2 * w, float(r.mean())


@dataclass
class _SubModel:
    weights: np.ndarray | None  # None for constant fallback
    intercept: float
    constant: float | None = None

    def predict(self, Xs: np.ndarray) -> np.ndarray:
        if self.constant is not None:
            return np.full(Xs.shape[0], self.constant)
        p = sigmoid(Xs @ self.weights + self.intercept)
        return np.clip(p, 1e-12, 1.0 - 1e-12)


@dataclass
class TLearnerModel:
    feature_names: list[str]
    mean: np.ndarray
    scale: np.ndarray
    submodels: dict[int, _SubModel]
    training_log: list[str] = field(default_factory=list)

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale

    def predict_outcome(self, t: int, X: np.ndarray) -> np.ndarray:
        if t not in self.submodels:
            raise ValueError(f"no sub-model for treatment {t}")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.submodels[t].predict(self._standardize(X))

    def predict_uplift(self, t: int, X: np.ndarray) -> np.ndarray:
        return self.predict_outcome(t, X) - self.predict_outcome(CONTROL, X)

    def treatments(self) -> list[int]:
        return sorted(self.submodels)

    def save(self, path: str | Path) -> None:
        payload = {
            "feature_names": self.feature_names,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "submodels": {
                str(t): {
                    "weights": None if m.weights is None else m.weights.tolist(),
                    "intercept": m.intercept,
                    "constant": m.constant,
                }
                for t, m in self.submodels.items()
            },
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TLearnerModel":
        payload = json.loads(Path(path).read_text())
        subs = {}
        for t, m in payload["submodels"].items():
            subs[int(t)] = _SubModel(
                weights=None if m["weights"] is None else np.asarray(m["weights"]),
                intercept=m["intercept"],
                constant=m["constant"],
            )
        return cls(
            feature_names=payload["feature_names"],
            mean=np.asarray(payload["mean"]),
            scale=np.asarray(payload["scale"]),
            submodels=subs,
        )


def _fit_group(
    Xs: np.ndarray, y: np.ndarray, cfg: TrainConfig, log: list[str], t: int
) -> _SubModel:
    n = len(y)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == n:
        # one-sided group: clamped empirical rate (Laplace smoothing)
        p = (n_pos + 1) / (n + 2)
        log.append(f"treatment {t}: single outcome class, constant predictor p={p:.6f}")
        return _SubModel(weights=None, intercept=0.0, constant=p)

    w = np.zeros(Xs.shape[1])
    base = np.clip(n_pos / n, 1e-6, 1 - 1e-6)
    b = float(np.log(base / (1 - base)))
    lr = cfg.learning_rate
    loss = logistic_loss(w, b, Xs, y, cfg.l2)
    for epoch in range(cfg.max_epochs):
        gw, gb = logistic_gradient(w, b, Xs, y, cfg.l2)
        gnorm = max(np.max(np.abs(gw)), abs(gb))
        if gnorm < cfg.grad_tol:
            break
        w_new, b_new = w - lr * gw, b - lr * gb
        new_loss = logistic_loss(w_new, b_new, Xs, y, cfg.l2)
        if new_loss > loss:
            lr *= 0.5
            log.append(f"treatment {t}: epoch {epoch}, halved learning rate to {lr:g}")
            continue
        w, b, loss = w_new, b_new, new_loss
    return _SubModel(weights=w, intercept=b)


def fit(train: Dataset, cfg: TrainConfig | None = None) -> TLearnerModel:
    """Fit one logistic sub-model per treatment id present in the data."""
    cfg = cfg or TrainConfig()
    X = train.features
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    scale = np.where(sd > 0, sd, 1.0)
    Xs = (X - mean) / scale
    log: list[str] = []
    submodels = {}
    for t in train.treatment_ids():
        mask = train.treatment == t
        submodels[int(t)] = _fit_group(Xs[mask], train.outcome[mask].astype(float), cfg, log, int(t))
    return TLearnerModel(
        feature_names=list(train.feature_names),
        mean=mean,
        scale=scale,
        submodels=submodels,
        training_log=log,
    )
