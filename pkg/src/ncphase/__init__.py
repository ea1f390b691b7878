"""Anti-Wick smoothing of classical observables for two non-commutative oscillators."""

from .params import DerivedParams, ParameterError, PhysParams, Regime, derive, limit_regime
from .functions import GaussFactor, PhaseVector, SepGaussFunction, evaluate, f_infinity
from .smoothing import (
    ConvergenceError,
    QuadratureSpec,
    kernel_widths,
    label_matrix,
    overlap_exponent,
    smooth,
    smooth_closed_form,
    smooth_hbar0,
    smooth_mc,
    smooth_theta0,
)
from .dynamics import evolution_matrix, evolved_hbar0, recover_period, smooth_evolved, weyl_label_flow
from .oracle import FockOracle, FockTruncation, TruncationError, ground_state

__version__ = "0.1.0"
