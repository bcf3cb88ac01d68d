"""Censored expectile and adaptive-LASSO expectile regression for AFT models."""

from .alasso import (
    PenalizedFitResult, PenaltySpec, TwoStageResult, adaptive_weights, default_lambda,
    fit_censored_alasso, kkt_report, make_penalty, two_stage_fit,
)
from .exceptions import CensoredExpectileError, DataError, DimensionMismatchError, NumericalError
from .inference import (
    AsymptoticPieces, CovarianceEstimate, bootstrap_covariance, confidence_intervals,
    oracle_bias_term, plug_in_covariance, plug_in_estimate,
)
from .io import DatasetSchema, LoadedData, read_csv
from .km import (
    Convention, IpcwWeights, KaplanMeierCurve, Side, cumulative_hazard, evaluate, fit_km,
    ipcw_weights, km_weights,
)
from .loss import WeightedObjectiveState, g, gradient, h, objective, rho
from .sample import SurvivalSample
from .simulation import (
    DataGenConfig, ErrorDist, InterceptMode, StudyReport, TrueModel, calibrate_c1,
    centering_tau, generate_dataset, run_study,
)
from .solver import FitResult, SolverConfig, fit_censored_expectile, fit_path_over_tau

__version__ = "0.1.0"
