"""Column-oriented sample container and CSV round-trip.

A dataset is a covariate matrix plus aligned treatment / outcome / source
columns. Treatment id 0 is always the control group. CSV layout:
``x_0..x_{j-1}, t, y, [true_uplift], source``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd


@dataclass
class Dataset:
    """Rows of (covariates, treatment, outcome) with per-row provenance."""

    features: np.ndarray  # (n, j) float64
    treatment: np.ndarray  # (n,) int64
    outcome: np.ndarray  # (n,) int64, values in {0, 1}
    source: np.ndarray  # (n,) str tags, e.g. "rct" / "obs" / "gt"
    feature_names: list[str] = field(default_factory=list)
    true_uplift: np.ndarray | None = None  # (n,) float64, synthetic only

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n = self.features.shape[0]
        self.treatment = np.asarray(self.treatment, dtype=np.int64)
        self.outcome = np.asarray(self.outcome, dtype=np.int64)
        self.source = np.asarray(self.source, dtype=object)
        if not self.feature_names:
            self.feature_names = [f"x_{i}" for i in range(self.features.shape[1])]
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError("feature_names length does not match feature count")
        for name, col in (("treatment", self.treatment),
                          ("outcome", self.outcome),
                          ("source", self.source)):
            if col.shape != (n,):
                raise ValueError(f"{name} column length {col.shape} != {n} rows")
        if np.any(self.treatment < 0):
            raise ValueError("treatment ids must be non-negative")
        if not np.isin(self.outcome, (0, 1)).all():
            raise ValueError("outcomes must be binary")
        if self.true_uplift is not None:
            self.true_uplift = np.asarray(self.true_uplift, dtype=np.float64)
            if self.true_uplift.shape != (n,):
                raise ValueError("true_uplift column length mismatch")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def treatment_ids(self) -> np.ndarray:
        return np.unique(self.treatment)

    def subset(self, idx: np.ndarray) -> "Dataset":
        """Row-select into a new dataset (idx may be a mask or index array)."""
        return Dataset(
            features=self.features[idx],
            treatment=self.treatment[idx],
            outcome=self.outcome[idx],
            source=self.source[idx],
            feature_names=list(self.feature_names),
            true_uplift=None if self.true_uplift is None else self.true_uplift[idx],
        )

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.features, columns=self.feature_names)
        df["t"] = self.treatment
        df["y"] = self.outcome
        if self.true_uplift is not None:
            df["true_uplift"] = self.true_uplift
        df["source"] = self.source
        return df

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False)


def concat(parts: list[Dataset]) -> Dataset:
    """Stack datasets row-wise; true_uplift survives only if all parts carry it."""
    if not parts:
        raise ValueError("nothing to concatenate")
    names = parts[0].feature_names
    for p in parts[1:]:
        if p.feature_names != names:
            raise ValueError("feature name mismatch between datasets")
    keep_uplift = all(p.true_uplift is not None for p in parts)
    return Dataset(
        features=np.vstack([p.features for p in parts]),
        treatment=np.concatenate([p.treatment for p in parts]),
        outcome=np.concatenate([p.outcome for p in parts]),
        source=np.concatenate([p.source for p in parts]),
        feature_names=list(names),
        true_uplift=np.concatenate([p.true_uplift for p in parts]) if keep_uplift else None,
    )


def from_frame(df: pd.DataFrame) -> Dataset:
    feature_names = [c for c in df.columns if c.startswith("x_")]
    required = {"t", "y", "source"}
    missing = required - set(df.columns)
    if missing:
        raise ValueError(f"missing required columns: {sorted(missing)}")
    uplift = df["true_uplift"].to_numpy() if "true_uplift" in df.columns else None
    return Dataset(
        features=df[feature_names].to_numpy(dtype=np.float64),
        treatment=df["t"].to_numpy(dtype=np.int64),
        outcome=df["y"].to_numpy(dtype=np.int64),
        source=df["source"].to_numpy(dtype=object),
        feature_names=feature_names,
        true_uplift=uplift,
    )


def read_csv(path: str | Path) -> Dataset:
    try:
        df = pd.read_csv(path)
    except pd.errors.ParserError as exc:
        raise ValueError(f"malformed CSV {path}: {exc}") from exc
    return from_frame(df)
