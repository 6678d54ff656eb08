"""NARX neural-network state-of-charge estimation with Levenberg-Marquardt training."""

from .data import (
    DriveCycleLog,
    Normalizer,
    RegressorDataset,
    build_regressors,
    coulomb_count,
    fit_normalizer,
    parse_cycle_csv,
    split_dataset,
)
from .ecm import CellParams, CellState, NoiseSpec, generate_profile, simulate_cycle
from .lm import TrainConfig, TrainHistory, lm_fit
from .metrics import MetricsReport, compute_metrics
from .narx import NarxModel, forward_closed_loop, forward_open_loop, init_model, jacobian

__version__ = "0.1.0"
