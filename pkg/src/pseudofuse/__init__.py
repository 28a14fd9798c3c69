"""Pseudo-sample matching data fusion for small, biased RCTs.

Augments a biased randomized trial with matched observational samples so that
each treatment group's mean on the selected features is pulled back onto the
overall trial mean, plus a synthetic evaluation harness (data generator,
T-learner uplift model, Qini/MAPE/COPC metrics) to measure the benefit.
"""

from .datasets import Dataset, concat, read_csv
from .dgp import DgpConfig, default_config, generate
from .fusion import BucketSpec, FeatureSelection, FuseConfig, fuse, random_fuse, smd_report
from .metrics import MetricsReport, qini_from_predictions
from .uplift import TLearnerModel, TrainConfig, fit

__all__ = [
    "Dataset",
    "concat",
    "read_csv",
    "DgpConfig",
    "default_config",
    "generate",
    "BucketSpec",
    "FeatureSelection",
    "FuseConfig",
    "fuse",
    "random_fuse",
    "smd_report",
    "MetricsReport",
    "qini_from_predictions",
    "TLearnerModel",
    "TrainConfig",
    "fit",
]

__version__ = "0.1.0"
