"""Physical inputs and the derived constants of the two-oscillator model.

Everything downstream (kernel widths, oscillation frequencies, the Fock-space
oracle) is written in terms of :class:`DerivedParams`, so this module is the
only place where the square roots and logarithms of the model are taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "PhysParams",
    "DerivedParams",
    "ParameterError",
    "Regime",
    "derive",
    "limit_regime",
    "BETA_RTOL",
]

#: relative agreement required between the two closed forms of ``beta``
BETA_RTOL = 1e-12


class ParameterError(ValueError):
    """Raised for parameter points outside the model's domain."""


@dataclass(frozen=True)
class PhysParams:
    """The four physical inputs.

    ``hbar`` is an action, ``theta`` an area (the configuration-space
    non-commutativity ``[x1, x2] = i theta``), ``mass`` and ``omega`` the
    oscillator mass and angular frequency. ``hbar = 0`` or ``theta = 0`` are
    admitted as exact limit points; both zero is rejected by :func:`derive`.
    """

    hbar: float = 1.0
    theta: float = 0.0
    mass: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "theta", "mass", "omega"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.hbar < 0 or self.theta < 0:
            raise ParameterError("hbar and theta must be non-negative")
        if self.mass <= 0 or self.omega <= 0:
            raise ParameterError("mass and omega must be positive")

    @property
    def m_omega(self) -> float:
        return self.mass * self.omega

    def replace(self, **changes) -> "PhysParams":
        fields = dict(hbar=self.hbar, theta=self.theta, mass=self.mass, omega=self.omega)
        fields.update(changes)
        return PhysParams(**fields)

    def as_dict(self) -> dict:
        return dict(hbar=self.hbar, theta=self.theta, mass=self.mass, omega=self.omega)


@dataclass(frozen=True)
class DerivedParams:
    """Derived scalars of the model.

    Attributes
    ----------
    lambda_plus, lambda_minus :
        Eigen-couplings of the Hamiltonian in the ladder basis;
        ``lambda_plus * lambda_minus = (m omega hbar)**2`` and
        ``lambda_plus - lambda_minus = (m omega)**2 theta``.
    K_plus, K_minus :
        Normalisers making the ladder operators dimensionless.
    mu :
        The action scale ``lambda_plus / (m omega)`` used by the Weyl
        operators and the time evolutor.
    gamma_plus, gamma_minus :
        Mixing weights of the smoothing kernel, summing to one.
    omega_plus, omega_minus :
        Oscillation frequencies ``lambda_pm / (m mu)``.
    beta :
        Exponent of the Hilbert-Schmidt ground state, ``beta <= 0``.
    norm_N :
        The ground-state normalisation constant in the form used by the
        model's literature, ``hbar^4 / (2 hbar^2 lambda_- - theta lambda_-^2)``.
        It equals ``theta * exp(-beta)`` times the Hilbert-Schmidt norm squared
        of the unnormalised ground state (see ``ground_state_trace``).
    J_det :
        Jacobian ``hbar^2 / (4 mu^4)`` between phase-space points and
        coherent-state labels.
    """

    params: PhysParams
    lambda_plus: float
    lambda_minus: float
    K_plus: float
    K_minus: float
    mu: float
    gamma_plus: float
    gamma_minus: float
    omega_plus: float
    omega_minus: float
    beta: float
    norm_N: float
    J_det: float

    @property
    def ground_state_trace(self) -> float:
        """``tr(psi0^dagger psi0)`` of the unnormalised ground state.

        Sum of ``exp(beta (2n + 1))`` over all Fock levels, in closed form.
        """
        if self.params.hbar == 0:
            return 0.0
        if self.params.theta == 0:
            return math.inf
        return 1.0 / (-2.0 * math.sinh(self.beta))

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "lambda_plus", "lambda_minus", "K_plus", "K_minus", "mu",
            "gamma_plus", "gamma_minus", "omega_plus", "omega_minus",
            "beta", "norm_N", "J_det")}
        return out


def derive(params: PhysParams) -> DerivedParams:
    """Compute every derived constant from the physical inputs.

    Raises
    ------
    ParameterError
        If ``hbar == theta == 0`` or the two closed forms of ``beta``
        disagree beyond :data:`BETA_RTOL`.
    """
    hbar, theta, m, w = params.hbar, params.theta, params.mass, params.omega
    if hbar == 0 and theta == 0:
        raise ParameterError("hbar = theta = 0 is fully degenerate: every derived scalar vanishes")
    mw = m * w
    root = math.sqrt(4 * hbar**2 + (mw * theta) ** 2)
    lam_p = 0.5 * (mw * root + mw * mw * theta)
    # rationalised form of 0.5 * (mw*root - mw^2 theta); avoids cancellation when hbar << theta
    lam_m = 2 * mw * hbar**2 / (root + mw * theta)
    mu = lam_p / mw

    root2 = math.sqrt(4 * hbar**2 + 2 * (mw * theta) ** 2)
    gamma_p = 0.5 * (1 + mw * theta / root2)
    gamma_m = 0.5 * (1 - mw * theta / root2)

    omega_p = lam_p / (m * mu)
    omega_m = lam_m / (m * mu)

    if hbar > 0:
        K_p = lam_p * (4 + 2 * lam_p * theta / hbar**2)
        K_m = lam_m * (4 - 2 * lam_m * theta / hbar**2)
        # theta lam_m / hbar^2 = (m omega)^2 theta / lam_p, and 1 minus it is lam_m / lam_p;
        # pick whichever form of log(1 - x) is well conditioned
        x = mw * mw * theta / lam_p
        beta_minus = math.log1p(-x) if x < 0.5 else math.log(lam_m / lam_p)
        beta_plus = -math.log1p(theta * lam_p / hbar**2)
        scale = max(abs(beta_minus), abs(beta_plus))
        if scale > 0 and abs(beta_minus - beta_plus) > BETA_RTOL * scale:
            raise ParameterError(
                f"inconsistent ground-state exponent: {beta_minus!r} vs {beta_plus!r}")
        beta = beta_plus
        norm_N = hbar**4 / (2 * hbar**2 * lam_m - theta * lam_m**2)
        J_det = hbar**2 / (4 * mu**4)
    else:
        # exact hbar -> 0 limits
        K_p = math.inf
        K_m = 0.0
        beta = -math.inf
        norm_N = theta
        J_det = 0.0

    return DerivedParams(
        params=params,
        lambda_plus=lam_p,
        lambda_minus=lam_m,
        K_plus=K_p,
        K_minus=K_m,
        mu=mu,
        gamma_plus=gamma_p,
        gamma_minus=gamma_m,
        omega_plus=omega_p,
        omega_minus=omega_m,
        beta=beta,
        norm_N=norm_N,
        J_det=J_det,
    )


class Regime(str, Enum):
    GENERIC = "generic"
    NEAR_COMMUTATIVE_CONFIG = "near-commutative-config"
    NEAR_NONCOMMUTATIVE = "near-noncommutative"
    NEAR_CLASSICAL = "near-classical"
    FULLY_DEGENERATE = "fully-degenerate"


def limit_regime(params: PhysParams, eps: float) -> Regime:
    """Classify which limiting branch a parameter point is probing.

    ``near-commutative-config`` when ``m omega theta / hbar < eps`` (theta is
    negligible), ``near-noncommutative`` when ``hbar / (m omega theta) < eps``,
    ``near-classical`` when both are comparable but ``mu < eps``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    hbar, theta, mw = params.hbar, params.theta, params.m_omega
    if hbar == 0 and theta == 0:
        return Regime.FULLY_DEGENERATE
    if theta == 0 or (hbar > 0 and mw * theta / hbar < eps):
        return Regime.NEAR_COMMUTATIVE_CONFIG
    if hbar == 0 or hbar / (mw * theta) < eps:
        return Regime.NEAR_NONCOMMUTATIVE
    if derive(params).mu < eps:
        return Regime.NEAR_CLASSICAL
    return Regime.GENERIC
