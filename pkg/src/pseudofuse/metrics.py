"""Uplift evaluation metrics: Qini, group-level MAPE, COPC, weighted aggregates.

Qini follows the cumulative-incremental-gain construction: rank by predicted
uplift (ties by ascending row index), and at each prefix compare treated
outcome mass against control outcome mass scaled by the treated/control count
ratio. The coefficient is the area between that curve and the straight line to
its endpoint, normalized by the number of rows.

MAPE is group-level: |mean predicted uplift - reference ATE| / |reference ATE|.
COPC is sum(actual) / sum(predicted). Aggregates weight each treatment group
by its size relative to the full population, so partial coverage scales the
optimum of the weighted COPC down to the coverage fraction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

DEFAULT_GRID = 100


def qini_curve(
    scores: np.ndarray,
    treated: np.ndarray,
    y: np.ndarray,
    grid: int = DEFAULT_GRID,
) -> np.ndarray:
    """Incremental-gain curve over `grid` prefix fractions.

    Returns an array of (fraction, gain) rows, starting at (0, 0). `treated`
    is a boolean/0-1 array: True for the treated arm, False for control.
    """
    scores = np.asarray(scores, dtype=np.float64)
    treated = np.asarray(treated).astype(bool)
    y = np.asarray(y, dtype=np.float64)
    n = len(scores)
    if treated.all() or not treated.any():
        raise ValueError("qini_curve needs both a treated and a control arm")
    order = np.argsort(-scores, kind="stable")
    t_sorted = treated[order]
    y_sorted = y[order]
    cum_yt = np.cumsum(y_sorted * t_sorted)
    cum_yc = np.cumsum(y_sorted * ~t_sorted)
    cum_nt = np.cumsum(t_sorted)
    cum_nc = np.cumsum(~t_sorted)
    points = [(0.0, 0.0)]
    for i in range(1, grid + 1):
        phi = i / grid
        idx = int(np.ceil(phi * n)) - 1
        if cum_nc[idx] > 0:
            gain = cum_yt[idx] - cum_yc[idx] * cum_nt[idx] / cum_nc[idx]
        else:
            gain = cum_yt[idx]
        points.append((phi, float(gain)))
    return np.asarray(points)


def qini_coefficient(curve: np.ndarray) -> float:
    """Raw area between the curve and the straight line to its endpoint.

    Trapezoidal integration over the fraction grid; divide by the row count
    (as `qini_from_predictions` does) to get the normalized coefficient.
    """
    phi = curve[:, 0]
    gain = curve[:, 1]
    auc = float(np.trapezoid(gain, phi))
    line = float(np.trapezoid(phi * gain[-1], phi))
    return auc - line


def qini_from_predictions(
    scores: np.ndarray,
    treated: np.ndarray,
    y: np.ndarray,
    grid: int = DEFAULT_GRID,
) -> float:
    """Qini coefficient normalized by total row count."""
    curve = qini_curve(scores, treated, y, grid=grid)
    return qini_coefficient(curve) / len(scores)


def group_mape(predicted_uplift: np.ndarray, reference_ate: float) -> float | None:
    """Group-level MAPE; None when the reference effect is exactly zero."""
    if reference_ate == 0:
        warnings.warn("reference ATE is zero; group MAPE undefined", stacklevel=2)
        return None
    return abs(float(np.mean(predicted_uplift)) - reference_ate) / abs(reference_ate)


def per_sample_mape(predicted_uplift: np.ndarray, true_uplift: np.ndarray) -> float:
    """Per-sample variant for synthetic data; rows with zero truth are dropped."""
    true_uplift = np.asarray(true_uplift, dtype=np.float64)
    mask = true_uplift != 0
    if not mask.any():
        raise ValueError("all true uplifts are zero")
    return float(
        np.mean(np.abs(predicted_uplift[mask] - true_uplift[mask]) / np.abs(true_uplift[mask]))
    )


def group_copc(predicted_prob: np.ndarray, y: np.ndarray) -> float:
    total_pred = float(np.sum(predicted_prob))
    if total_pred <= 0:
        raise ValueError("sum of predicted probabilities must be positive")
    return float(np.sum(y)) / total_pred


@dataclass
class GroupMetrics:
    treatment: int
    size: int
    qini: float
    mape: float | None
    copc: float


@dataclass
class MetricsReport:
    groups: list[GroupMetrics]
    coverage: float
    w_qini: float
    w_mape: float | None
    w_copc: float

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "treatment": g.treatment,
                "size": g.size,
                "qini": g.qini,
                "mape": g.mape,
                "copc": g.copc,
            }
            for g in self.groups
        ]
        rows.append(
            {
                "treatment": "weighted",
                "size": sum(g.size for g in self.groups),
                "qini": self.w_qini,
                "mape": self.w_mape,
                "copc": self.w_copc,
            }
        )
        return pd.DataFrame(rows)


def weighted_report(
    groups: list[GroupMetrics], total_population: int | None = None
) -> MetricsReport:
    """Population-share-weighted aggregates over per-treatment metrics.

    `total_population` defaults to the sum of group sizes (full coverage).
    Weights are size_g / total_population, so they sum to the coverage
    fraction; groups with an undefined MAPE are excluded from the MAPE
    aggregate with a warning.
    """
    if not groups:
        raise ValueError("no groups to aggregate")
    sizes = np.array([g.size for g in groups], dtype=float)
    total = float(total_population) if total_population is not None else float(sizes.sum())
    weights = sizes / total
    coverage = float(weights.sum())
    w_qini = float(np.sum(weights * [g.qini for g in groups]))
    w_copc = float(np.sum(weights * [g.copc for g in groups]))
    mape_pairs = [(w, g.mape) for w, g in zip(weights, groups) if g.mape is not None]
    if len(mape_pairs) < len(groups):
        warnings.warn("some groups lack a defined MAPE and were excluded", stacklevel=2)
    if mape_pairs:
        w_mape = float(sum(w * m for w, m in mape_pairs))
    else:
        w_mape = None
    return MetricsReport(
        groups=groups, coverage=coverage, w_qini=w_qini, w_mape=w_mape, w_copc=w_copc
    )


def evaluate_group(
    treatment: int,
    treated_mask: np.ndarray,
    y: np.ndarray,
    predicted_uplift: np.ndarray,
    predicted_prob: np.ndarray,
    true_uplift: np.ndarray | None = None,
    grid: int = DEFAULT_GRID,
) -> GroupMetrics:
    """Metrics for one treatment group versus control.

    Inputs are aligned over the rows of the pair (treated-i rows plus control
    rows). The MAPE reference is the mean true uplift when available, else the
    empirical difference of arm outcome means.
    """
    treated_mask = np.asarray(treated_mask).astype(bool)
    qini = qini_coefficient(qini_curve(predicted_uplift, treated_mask, y, grid=grid)) / len(y)
    if true_uplift is not None:
        reference = float(np.mean(true_uplift))
    else:
        reference = float(y[treated_mask].mean() - y[~treated_mask].mean())
    mape = group_mape(predicted_uplift, reference)
    copc = group_copc(predicted_prob, y)
    return GroupMetrics(
        treatment=treatment,
        size=int(treated_mask.sum()),
        qini=qini,
        mape=mape,
        copc=copc,
    )
