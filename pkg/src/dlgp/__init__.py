"""Dividing local Gaussian processes for streaming regression."""

from .baseline import ExactGp, fit_batch, predict_batch
from .dataio import Dataset, ExperimentConfig, load_config, load_csv, parse_config, write_csv
from .errors import (
    ConfigError,
    DegenerateDivision,
    DegenerateTargets,
    DlgpError,
    ModelEmpty,
    NotPositiveDefinite,
    ParseError,
)
from .kernel import Hyperparameters, kernel_eval, kernel_matrix, kernel_vector
from .local_gp import LocalModel
from .metrics import MetricAccumulator, gaussian_nll, nmse, overlap_ratio
from .partition import DivisionRule, DivisionStrategy, compute_rule, p_eval
from .scenarios import ReportRow, run_checkpoint_scenario, run_online_scenario
from .tree import DlgpTree, PredictiveDistribution, make_target_trees

__version__ = "0.1.0"
