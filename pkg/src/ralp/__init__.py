"""Random access with layered preambles: simulation and detection toolkit."""

__version__ = "0.1.0"

from .channel import ActivityMap, ChannelConfig, ReceivedSignal, db_to_linear, draw_activity, synthesize
from .preambles import PreamblePool, build_pool, cross_correlation
from .sic import ErrorInjection, ProjectionReport, inject_detection_error, project_out
from .theory import (
    ErrorBudget,
    TheoryParams,
    calibrate_tau1,
    calibrate_tau2,
    error_budget,
    gamma_cdf,
    interference_power,
    invert_nu1,
    kl_distance,
)
from .type1 import Type1Decision, Type1Detector, Verdict, classify, correlate
from .type2 import CaviDetector, MmvProblem, Type2Decision, build_mmv, cavi_detect, sigma_s_sq

__all__ = [
    "ActivityMap",
    "CaviDetector",
    "ChannelConfig",
    "ErrorBudget",
    "ErrorInjection",
    "MmvProblem",
    "PreamblePool",
    "ProjectionReport",
    "ReceivedSignal",
    "TheoryParams",
    "Type1Decision",
    "Type1Detector",
    "Type2Decision",
    "Verdict",
    "build_mmv",
    "build_pool",
    "calibrate_tau1",
    "calibrate_tau2",
    "cavi_detect",
    "classify",
    "correlate",
    "cross_correlation",
    "db_to_linear",
    "draw_activity",
    "error_budget",
    "gamma_cdf",
    "inject_detection_error",
    "interference_power",
    "invert_nu1",
    "kl_distance",
    "project_out",
    "sigma_s_sq",
    "synthesize",
]
