"""Choosing which reporters send which report formats so that an event is
credibly corroborated at low cost."""

from .assignment import IDLE, Assignment, evaluate
from .dp import MaxC, MaxCProblem, MinC, MinCProblem, brute_force, solve_maxc_dp, solve_minc_dp
from .errors import (
    CategoryMismatch,
    CorroborationError,
    Infeasible,
    InfeasibleFrame,
    InfeasibleVector,
    InvalidDiscretization,
    InvariantViolation,
    ParseError,
    TooLarge,
    VectorTooLarge,
)
from .flow import build_network, solve_maxc_mcf, solve_minc_mcf, solve_vector
from .model import (
    ADDITIVE,
    CorroborationFn,
    CredibilityMatrix,
    Event,
    Format,
    FormatSet,
    NoiseSource,
    Reporter,
    Scenario,
    build_matrix,
    corroborate,
    credibility,
    format_thresholds,
    noise_factor,
    noisy_credibility,
)
from .structured import (
    TwoFormatInstance,
    maxc_two_format,
    preselect_formats,
    solve_maxc_ann,
    solve_maxc_two_format,
    solve_minc_ann,
)

__all__ = [name for name in dir() if not name.startswith("_")]
