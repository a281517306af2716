"""Projection of Wiener-space measures onto deterministic shifts.

Two routes to the optimal shift: Euler-Lagrange shooting on the smoothed
Lagrangian and Monte Carlo minimisation of the sample-average KL objective.
"""
from .clark_ocone import ItoKernelResult, ito_kernel, ito_residual, printed_cubic_kernel
from .errors import (Diverged, EvaluationError, IntegrationDiverged, InvalidArgument,
                     ShootingFailed, UnsupportedKernel)
from .functionals import (AuditBox, AuditReport, Callback, DeterministicPoly, DriftKernel,
                          IntegralTerminal, ItoForm, PathSlopeKernel, SpacePoly,
                          audit_hypotheses, entropy_check, expression_kernel)
from .gaussian_calc import (Polynomial, expect_function, expect_polynomial, gauss_hermite,
                            gaussian_moment)
from .grid_paths import (DiscretePath, PathDerivative, TimeGrid, finite_difference,
                         sobolev_norm_sq, trapezoid, uniform_grid)
from .stochastic_lab import (BernoulliMixture, BrownianEnsemble, DeterministicPath, Estimate,
                             FrozenObjective, StateKernel, girsanov_logdensity, kl_estimate,
                             kl_shift, minimize_action_mc, mixture_drift, penalty_D,
                             sample_ensemble, simulate_xtilde)
from .variational import (ELSolution, Fixed, FreeEndpoint, LagrangianModel, action,
                          el_residual, integrate_el, lagrangian, scan_terminal, shoot)

__version__ = "0.1.0"

__all__ = [
    "AuditBox",
    "AuditReport",
    "BernoulliMixture",
    "BrownianEnsemble",
    "Callback",
    "DeterministicPath",
    "DeterministicPoly",
    "DiscretePath",
    "Diverged",
    "DriftKernel",
    "ELSolution",
    "Estimate",
    "EvaluationError",
    "Fixed",
    "FreeEndpoint",
    "FrozenObjective",
    "IntegralTerminal",
    "IntegrationDiverged",
    "InvalidArgument",
    "ItoForm",
    "ItoKernelResult",
    "LagrangianModel",
    "PathDerivative",
    "PathSlopeKernel",
    "Polynomial",
    "ShootingFailed",
    "SpacePoly",
    "StateKernel",
    "TimeGrid",
    "UnsupportedKernel",
    "action",
    "audit_hypotheses",
    "el_residual",
    "entropy_check",
    "expect_function",
    "expect_polynomial",
    "expression_kernel",
    "finite_difference",
    "gauss_hermite",
    "gaussian_moment",
    "girsanov_logdensity",
    "integrate_el",
    "ito_kernel",
    "ito_residual",
    "kl_estimate",
    "kl_shift",
    "lagrangian",
    "minimize_action_mc",
    "mixture_drift",
    "penalty_D",
    "printed_cubic_kernel",
    "sample_ensemble",
    "scan_terminal",
    "shoot",
    "simulate_xtilde",
    "sobolev_norm_sq",
    "trapezoid",
    "uniform_grid",
]
