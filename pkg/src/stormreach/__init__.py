"""Stochastic storm fields from nowcast data plus reach-avoid trajectory planning."""

from .cluster import ClusterAssignment, kmeans, select_k
from .errors import DataError, NowcastParseError, SchemaViolationError, StormReachError
from .grid import GridSpec
from .kernel import AircraftParams, TransitionKernel, build_kernel
from .mve import Ellipse, min_volume_ellipse
from .nowcast import NowcastFile, StormCellObservation, parse_nowcast, serialize_nowcast
from .projection import IBERIA_FRAME, PlanarFrame
from .rollout import ObservedCells, RolloutReport, envelope, rollout
from .solver import ReachAvoidProblem, Solution, evaluate, solve
from .stats import (ErrorModelSet, ForecastErrorSample, GrowthModel, LogisticModel,
                    bic, fit_error_models, fit_growth_scale, fit_logistic_mle,
                    fit_normal_mle, load_models, pair_errors, save_models)
from .stormfield import (StormCellState, StormField, build_storm_field,
                         interpolate_field, merge_cluster_fields, planar_cell,
                         sample_cell_path)

__version__ = "0.1.0"
