"""Cross-arm comparison report: summary CSV plus rendered metric figures."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

METRICS = ("w_qini", "w_mape", "w_copc")
METRIC_LABELS = {"w_qini": "weighted Qini", "w_mape": "weighted MAPE", "w_copc": "weighted COPC"}
_SAVEFIG = {"dpi": 150, "metadata": {"Date": None}}  # keep PNG bytes reproducible


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation per (arm, ratio, test set)."""
    g = results.groupby(["arm", "ratio", "test_set"], sort=True)
    out = g[list(METRICS)].agg(["mean", "std"])
    out.columns = [f"{m}_{s}" for m, s in out.columns]
    return out.reset_index()


def write_summary(results: pd.DataFrame, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "summary.csv"
    summarize(results).to_csv(path, index=False)
    return path


def plot_ratio_trends(results: pd.DataFrame, out_dir: Path) -> Path:
    """Metric-vs-ratio series for the fused arm on both test sets, with the
    baseline as a horizontal reference band."""
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summarize(results)
    fused = summary[summary["arm"].str.startswith("fused")]
    baseline = summary[summary["arm"] == "baseline"]
    fig, axes = plt.subplots(1, len(METRICS), figsize=(5 * len(METRICS), 4))
    colors = {"biased": "tab:red", "ground_truth": "tab:blue"}
    for ax, metric in zip(axes, METRICS):
        for test_set, color in colors.items():
            rows = fused[fused["test_set"] == test_set].sort_values("ratio")
            ax.errorbar(
                rows["ratio"],
                rows[f"{metric}_mean"],
                yerr=rows[f"{metric}_std"],
                marker="o",
                capsize=3,
                color=color,
                label=f"fused, {test_set}",
            )
            base = baseline[baseline["test_set"] == test_set]
            if len(base):
                ax.axhline(
                    float(base[f"{metric}_mean"].iloc[0]),
                    color=color,
                    linestyle="--",
                    alpha=0.5,
                    label=f"baseline, {test_set}",
                )
        ax.set_xlabel("fusion ratio k")
        ax.set_ylabel(METRIC_LABELS[metric])
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "metrics_vs_ratio.png"
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
    return path


def plot_arm_comparison(results: pd.DataFrame, out_dir: Path) -> Path:
    """Grouped bars: every arm's ground-truth metrics with across-seed error bars."""
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summarize(results)
    gt = summary[summary["test_set"] == "ground_truth"].copy()
    gt["label"] = np.where(
        gt["arm"] == "baseline", "baseline", gt["arm"]
    )
    gt = gt.sort_values(["ratio", "arm"]).reset_index(drop=True)
    fig, axes = plt.subplots(1, len(METRICS), figsize=(5 * len(METRICS), 4))
    x = np.arange(len(gt))
    for ax, metric in zip(axes, METRICS):
        ax.bar(x, gt[f"{metric}_mean"], yerr=gt[f"{metric}_std"], capsize=3)
        ax.set_xticks(x)
        ax.set_xticklabels(gt["label"], rotation=45, ha="right", fontsize=8)
        ax.set_ylabel(METRIC_LABELS[metric])
        ax.set_title("ground-truth test set", fontsize=9)
    fig.tight_layout()
    path = out_dir / "arm_comparison.png"
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
    return path


def render_report(results: pd.DataFrame, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        write_summary(results, out_dir),
        plot_ratio_trends(results, out_dir),
        plot_arm_comparison(results, out_dir),
    ]
