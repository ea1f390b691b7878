"""Time evolution of the smoothed observables.

The oscillators rotate each coherent label ``z_j`` at its own frequency,
``z_j -> exp(i omega_j t) z_j`` with ``omega_1 = omega_plus`` and
``omega_2 = omega_minus``. :func:`evolution_matrix` is the block rotation that
pairs ``(x1, y1)`` at ``omega_plus`` and ``(x2, y2)`` at ``omega_minus``;
it is symplectic and reduces to the flow of two ordinary oscillators at
theta = 0. :func:`weyl_label_flow` is the exact action of the quantum
evolution on Weyl labels for theta > 0, obtained by conjugating the same
rotation with the coherent-label map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .functions import SepGaussFunction, as_point, f_infinity
from .params import DerivedParams, ParameterError, PhysParams, derive
from .smoothing import (
    DEFAULT_VARIANT,
    QuadratureSpec,
    QuadratureResult,
    gauss_hermite_expectation,
    gaussian_expectation,
    hbar0_scale,
    kernel_widths,
    label_matrix,
    smooth,
)

__all__ = [
    "OMEGA",
    "SymplecticMatrix4",
    "evolution_matrix",
    "rotation_matrix",
    "weyl_label_flow",
    "symplectic_residual",
    "smooth_evolved",
    "smooth_evolved_closed_form",
    "evolved_hbar0",
    "hbar0_cancellation",
    "recover_period",
]

#: standard symplectic form on (x1, x2, y1, y2)
OMEGA = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])


@dataclass(frozen=True)
class SymplecticMatrix4:
    matrix: np.ndarray
    t: float
    omega_plus: float
    omega_minus: float

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __matmul__(self, other):
        return self.matrix @ np.asarray(other)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


def rotation_matrix(t: float, omega_plus: float, omega_minus: float, scale: float = 1.0) -> np.ndarray:
    """Block rotation in the ``(x1, y1)`` and ``(x2, y2)`` planes.

    ``scale`` converts between position and momentum units (``m omega``);
    with ``scale = 1`` this is the rotation of dimensionless labels.
    """
    cp, sp = math.cos(omega_plus * t), math.sin(omega_plus * t)
    cm, sm = math.cos(omega_minus * t), math.sin(omega_minus * t)
    return np.array([
        [cp, 0.0, -sp / scale, 0.0],
        [0.0, cm, 0.0, -sm / scale],
        [scale * sp, 0.0, cp, 0.0],
        [0.0, scale * sm, 0.0, cm],
    ])


def evolution_matrix(t: float, params: PhysParams, derived: Optional[DerivedParams] = None) -> SymplecticMatrix4:
    """Phase-space evolution matrix ``A_t``.

    Momenta enter divided by ``m omega`` so the matrix is dimensionally
    consistent; in units ``m = omega = 1`` it is the bare block rotation.
    Valid at ``hbar = 0`` (``omega_minus = 0``) and ``theta = 0`` (both
    frequencies equal ``omega``).
    """
    d = derived or derive(params)
    A = rotation_matrix(t, d.omega_plus, d.omega_minus, params.m_omega)
    return SymplecticMatrix4(A, float(t), d.omega_plus, d.omega_minus)


def weyl_label_flow(t: float, params: PhysParams, derived: Optional[DerivedParams] = None) -> np.ndarray:
    """Matrix ``T_t`` with ``U_t^dagger W(r) U_t = W(T_t r)``.

    The coherent labels rotate as ``z -> R_t z``, so ``T_t = J^-1 R_t J`` with
    ``J`` the label map. Needs ``hbar > 0``.
    """
    d = derived or derive(params)
    J = label_matrix(params, d)
    R = rotation_matrix(t, d.omega_plus, d.omega_minus)
    return np.linalg.solve(J, R @ J)


def symplectic_residual(A) -> float:
    """Frobenius norm of ``Omega A_t - A_{-t}^T Omega``, with ``A_{-t} = A_t^{-1}``."""
    A = np.asarray(A, dtype=float)
    return float(np.linalg.norm(OMEGA @ A - np.linalg.inv(A).T @ OMEGA))


def _flow_and_transform(t, params, variant, flow, derived):
    L = kernel_widths(params, variant).transform()
    if flow == "block":
        A = evolution_matrix(-t, params, derived).matrix
        return A, A @ L
    if flow == "exact":
        T = weyl_label_flow(-t, params, derived)
        return T, L
    raise ValueError(f"unknown flow {flow!r}")


def smooth_evolved(F: SepGaussFunction, r, t: float, params: PhysParams,
                   q: QuadratureSpec = QuadratureSpec(), variant: str = DEFAULT_VARIANT,
                   flow: str = "block", check: bool = True) -> QuadratureResult:
    """Time-evolved smoothed observable ``F_{hbar,theta,t}(r)``.

    ``flow="block"`` evaluates ``pi^-2 \\int exp(-|w|^2) F(A_{-t}(r + h(w)))``
    with the block matrix of :func:`evolution_matrix`; its classical limit is
    ``F(A_{-t} r)``. ``flow="exact"`` evaluates
    ``pi^-2 \\int exp(-|w|^2) F(T_{-t} r + h(w))`` with the exact label flow.
    The two agree at theta = 0. At ``t = 0`` this is :func:`smooth`.
    """
    if t == 0:
        return smooth(F, r, params, q, variant, check=check)
    d = derive(params)
    r = as_point(r)
    M0, M = _flow_and_transform(t, params, variant, flow, d)
    return gauss_hermite_expectation(F, M0 @ r, M, q, check=check)


def smooth_evolved_closed_form(F: SepGaussFunction, r, t: float, params: PhysParams,
                               variant: str = DEFAULT_VARIANT, flow: str = "block") -> float:
    """Exact counterpart of :func:`smooth_evolved` on the separable family."""
    d = derive(params)
    r = as_point(r)
    M0, M = _flow_and_transform(t, params, variant, flow, d)
    return gaussian_expectation(F, M0 @ r, 0.5 * M @ M.T)


def evolved_hbar0(F: SepGaussFunction, r, t: float, theta: float, params: PhysParams = PhysParams(),
                  convention: str = "displayed") -> float:
    """hbar -> 0 limit of the evolved map.

    Only ``y2`` survives: ``pi^{-1/2} \\int dv exp(-v^2) F_inf(y2 + sigma v)``
    with ``F_inf`` the limit of ``F`` as ``x1, x2, y1 -> +infinity`` and
    ``sigma`` from :func:`hbar0_scale`. The result does not depend on ``t``.
    """
    if not theta > 0:
        raise ParameterError("evolved_hbar0 needs theta > 0")
    F.require_separable("evolved_hbar0")
    F_inf = f_infinity(F, ("x1", "x2", "y1"))
    sigma = hbar0_scale(theta, params, convention)
    cov = np.diag([0.0, 0.0, 0.0, 0.5 * sigma**2])
    return gaussian_expectation(F_inf, as_point(r), cov)


def hbar0_cancellation(hbars, t: float, theta: float, params: PhysParams = PhysParams(),
                       variant: str = DEFAULT_VARIANT):
    """Rows ``(hbar, f_coeff_plus, sin(omega_minus t), product)`` along a sweep.

    The position smearing diverges like ``1/hbar`` while ``omega_minus``
    vanishes like ``hbar^2``, so their product goes to zero.
    """
    rows = []
    for hbar in hbars:
        p = params.replace(hbar=float(hbar), theta=theta)
        d = derive(p)
        f = kernel_widths(p, variant).f_coeff_plus
        s = math.sin(d.omega_minus * t)
        rows.append((float(hbar), f, s, f * s))
    return rows


def recover_period(params: PhysParams, t_max: Optional[float] = None, samples: int = 2001) -> float:
    """First return time ``T > 0`` of ``A_t`` to the identity.

    Scans ``|A_t - 1|_F`` for the first interior local minimum, then polishes
    the root of the ``(y1, x1)`` entry, which changes sign there.
    """
    d = derive(params)
    freqs = [w for w in (d.omega_plus, d.omega_minus) if w > 0]
    if not freqs:
        raise ParameterError("no oscillating block")
    t_max = t_max or 3 * math.pi / min(freqs)
    ts = np.linspace(0.0, t_max, samples)
    dist = np.array([np.linalg.norm(evolution_matrix(t, params, d).matrix - np.eye(4)) for t in ts])
    for i in range(2, samples - 1):
        if dist[i] <= dist[i - 1] and dist[i] <= dist[i + 1] and dist[i] < 0.5 * dist.max():
            lo, hi = ts[i - 1], ts[i + 1]
            g = lambda t: evolution_matrix(t, params, d).matrix[2, 0]
            if g(lo) * g(hi) < 0:
                return float(optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
            return float(optimize.minimize_scalar(
                lambda t: np.linalg.norm(evolution_matrix(t, params, d).matrix - np.eye(4)),
                bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}).x)
    raise RuntimeError("no return to the identity found within t_max")
