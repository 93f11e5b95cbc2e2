"""Subsampling-winner feature selection for high-dimensional regression."""

from .assurance import combine_external, double_assurance, read_feature_list
from .dataset import Dataset, load_csv, save_csv, standardize
from .engine import (
    ScoreTable,
    SelectionResult,
    SubsampleFit,
    SwaConfig,
    adjust,
    compute_scores,
    draw_subsample,
    pick_semifinalists,
    run_subsamples,
    score_features,
    select,
)
from .errors import DataError, NumericalError, SwaError
from .mbounds import MBounds, capture_probability, exact_m, m_bounds
from .ols import OlsFit, fit, stepwise_backward
from .prescreen import ScreenResult, screen_threshold, screen_top_k
from .simlab import (
    CaptureTable,
    ScenarioSpec,
    draw,
    make_example1,
    make_example2,
    make_null,
    run_trials,
)
from .tuning import TuneReport, WeightCurve, detect_elbow, emit_panels, tune

__version__ = "0.1.0"

__all__ = [
    "CaptureTable",
    "DataError",
    "Dataset",
    "MBounds",
    "NumericalError",
    "OlsFit",
    "ScenarioSpec",
    "ScoreTable",
    "ScreenResult",
    "SelectionResult",
    "SubsampleFit",
    "SwaConfig",
    "SwaError",
    "TuneReport",
    "WeightCurve",
    "adjust",
    "capture_probability",
    "combine_external",
    "compute_scores",
    "detect_elbow",
    "double_assurance",
    "draw",
    "draw_subsample",
    "emit_panels",
    "exact_m",
    "fit",
    "load_csv",
    "m_bounds",
    "make_example1",
    "make_example2",
    "make_null",
    "pick_semifinalists",
    "read_feature_list",
    "run_subsamples",
    "run_trials",
    "save_csv",
    "score_features",
    "screen_threshold",
    "screen_top_k",
    "select",
    "standardize",
    "stepwise_backward",
    "tune",
]
