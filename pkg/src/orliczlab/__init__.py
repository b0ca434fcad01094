"""Numerical lab for sharp difference-quotient functionals in generalized Orlicz spaces."""

from .bbm import (
    CONVERGED,
    DIVERGENT,
    INCONCLUSIVE,
    ConvergenceReport,
    SmoothedQuotient,
    c_n,
    eps_norm,
    rho_sharp_eps,
    run_convergence,
    upper_bound_check,
)
from .catalog import CoefficientField, FunctionEntry, function_entry
from .errors import (
    ConfigurationError,
    ConvergenceFailure,
    DomainError,
    EmptyBallError,
    InputError,
    OrliczLabError,
    UnboundedNormError,
)
from .geometry import Box, Disk, Interval, Union
from .grid import GridDomain, GridField, ball_average, gradient_fd, interior_set, mollify, sharp_average
from .kernels import KernelSchedule
from .modular import luxemburg_norm, modular
from .phi import (
    ConvexifiedModel,
    DoublePhase,
    LogPerturbedExponent,
    OrliczTable,
    PhiModel,
    Power,
    StepIndicator,
    VariableExponent,
    convexify,
    eval_phi,
    inverse,
    phi_from_json,
)

__version__ = "0.1.0"
