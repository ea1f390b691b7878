"""The composed de-quantize/quantize map and its limiting forms.

For ``hbar > 0`` the anti-Wick round trip acts on a phase-space function as a
Gaussian convolution,

    F_{hbar,theta}(r) = pi^-2 int d^4w exp(-|w|^2) F(r + L w),

where the 4x4 matrix ``L`` (built from :class:`KernelWidths`) couples
``x1`` with ``y2`` and ``x2`` with ``y1``. This module evaluates that map by
tensor Gauss-Hermite quadrature, by Monte Carlo, and exactly on the separable
Gaussian-plus-constant family, together with the two iterated limits
(theta -> 0 first and hbar -> 0 first).
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .functions import SepGaussFunction, as_point, coord_index, f_infinity
from .params import DerivedParams, ParameterError, PhysParams, derive

__all__ = [
    "VARIANTS",
    "DEFAULT_VARIANT",
    "QuadratureSpec",
    "QuadratureResult",
    "MCResult",
    "ConvergenceError",
    "KernelWidths",
    "kernel_widths",
    "label_matrix",
    "overlap_exponent",
    "variant_exponent",
    "gauss_hermite_expectation",
    "gh_resolution",
    "gaussian_expectation",
    "smooth",
    "smooth_closed_form",
    "smooth_theta0",
    "smooth_hbar0",
    "smooth_mc",
    "hbar0_scale",
]

#: kernel constant variants; "A" is the one confirmed by the Fock-space oracle
VARIANTS = ("A", "B")
DEFAULT_VARIANT = "A"


class ConvergenceError(RuntimeError):
    """Quadrature error estimate above tolerance."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature and sampling controls.

    The Gauss-Hermite error estimate is ``|Q_n - Q_{n//2}|``, which tracks
    the error of the coarse rule and so overstates that of ``Q_n`` by orders
    of magnitude for smooth integrands; ``rel_tol`` defaults to 1e-2 for that
    reason. Tighten it when the estimate itself is to be trusted.
    """

    hermite_order: int = 20
    mc_samples: int = 100_000
    rng_seed: int = 0
    rel_tol: float = 1e-2
    abs_tol: float = 0.0

    def __post_init__(self):
        if not 2 <= self.hermite_order <= 128:
            raise ValueError("hermite_order must lie in [2, 128]")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.abs_tol < 0:
            raise ValueError("abs_tol must be non-negative")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be positive")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    order: int

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class MCResult:
    value: float
    std_error: float
    samples: int
    seed: int

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class KernelWidths:
    """Coefficients of the smearing functions.

    ``f(u, v) = f_coeff_plus * u + f_coeff_minus * v`` smears positions and
    ``g(u, v) = g_coeff_plus * u + g_coeff_minus * v`` smears momenta; the
    minus-coefficient of ``g`` carries the sign.
    """

    f_coeff_plus: float
    f_coeff_minus: float
    g_coeff_plus: float
    g_coeff_minus: float
    variant: str = DEFAULT_VARIANT

    def transform(self) -> np.ndarray:
        """Matrix ``L`` with ``h(w) = L @ w``."""
        fp, fm, gp, gm = self.f_coeff_plus, self.f_coeff_minus, self.g_coeff_plus, self.g_coeff_minus
        return np.array([
            [fp, fm, 0.0, 0.0],
            [0.0, 0.0, fp, fm],
            [0.0, 0.0, gp, gm],
            [-gp, -gm, 0.0, 0.0],
        ])

    def covariance(self) -> np.ndarray:
        """Covariance of the phase-space displacement ``L @ w``."""
        L = self.transform()
        return 0.5 * L @ L.T


def kernel_widths(params: PhysParams, variant: str = DEFAULT_VARIANT) -> KernelWidths:
    """Smearing coefficients at ``hbar > 0``.

    Variant ``"A"`` uses the fourth root of ``4 hbar^2 + (m omega theta)^2``
    in both prefactors; variant ``"B"`` swaps in ``4 hbar^2 + 2 (m omega
    theta)^2``. They coincide at ``theta = 0``.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown kernel variant {variant!r}")
    hbar, theta, mw = params.hbar, params.theta, params.m_omega
    if hbar <= 0:
        raise ParameterError("kernel widths need hbar > 0; use smooth_hbar0 for the hbar = 0 branch")
    d = derive(params)
    radicand_a = 4 * hbar**2 + (mw * theta) ** 2
    radicand_b = 4 * hbar**2 + 2 * (mw * theta) ** 2
    quarter = radicand_a ** 0.25 if variant == "A" else radicand_b ** 0.25
    c_f = d.mu * quarter / (2 * math.sqrt(mw) * hbar)
    c_g = d.mu * math.sqrt(mw) * quarter / math.sqrt(radicand_b)
    sp, sm = math.sqrt(d.gamma_plus), math.sqrt(d.gamma_minus)
    return KernelWidths(c_f / sp, c_f / sm, c_g / sp, -c_g / sm, variant)


def label_matrix(params: PhysParams, derived: Optional[DerivedParams] = None) -> np.ndarray:
    """Real 4x4 map ``r -> (Re z1, Re z2, Im z1, Im z2)`` to coherent labels."""
    d = derived or derive(params)
    hbar = params.hbar
    if hbar <= 0:
        raise ParameterError("coherent labels need hbar > 0")
    sKp, sKm = math.sqrt(d.K_plus), math.sqrt(d.K_minus)
    lp, lm = d.lambda_plus, d.lambda_minus
    c = 1.0 / (2 * d.mu * (lp + lm))
    return c * np.array([
        [lm * sKp, 0.0, 0.0, -hbar * sKp],
        [-lp * sKm, 0.0, 0.0, -hbar * sKm],
        [0.0, lm * sKp, hbar * sKp, 0.0],
        [0.0, lp * sKm, -hbar * sKm, 0.0],
    ])


def overlap_exponent(r, r_prime, params: PhysParams) -> np.ndarray:
    """Exponent ``E`` with ``|<z_r|z_r'>|^2 = exp(-E)``, from lambda and K.

    Accepts broadcastable arrays with a trailing axis of length 4.
    """
    d = derive(params)
    hbar = params.hbar
    lp, lm, Kp, Km = d.lambda_plus, d.lambda_minus, d.K_plus, d.K_minus
    diff = np.asarray(r, dtype=float) - np.asarray(r_prime, dtype=float)
    u1, u2, v1, v2 = diff[..., 0], diff[..., 1], diff[..., 2], diff[..., 3]
    cx = lm**2 * Kp + lp**2 * Km
    cy = hbar**2 * (Kp + Km)
    cxy = 2 * hbar * (lm * Kp - lp * Km)
    bracket = cx * (u1**2 + u2**2) + cy * (v1**2 + v2**2) - cxy * u1 * v2 + cxy * u2 * v1
    return bracket / (4 * d.mu**2 * (lp + lm) ** 2)


def variant_exponent(r, r_prime, params: PhysParams, variant: str = DEFAULT_VARIANT) -> np.ndarray:
    """Exponent implied by a kernel variant: ``|L^{-1} (r - r')|^2``."""
    L = kernel_widths(params, variant).transform()
    diff = np.asarray(r, dtype=float) - np.asarray(r_prime, dtype=float)
    y = np.linalg.solve(L, np.moveaxis(diff, -1, 0).reshape(4, -1))
    return np.sum(y**2, axis=0).reshape(diff.shape[:-1])


# --------------------------------------------------------------------------
# quadrature engine

@functools.lru_cache(maxsize=64)
def _hermite_rule(order: int):
    x, w = np.polynomial.hermite.hermgauss(order)
    # normalised so the weights sum to one against exp(-x^2)/sqrt(pi)
    return x, w / math.sqrt(math.pi)


def _components(M: np.ndarray):
    """Group coordinates that share a quadrature axis (nonzero entries of ``M``)."""
    n_out, n_in = M.shape
    parent = list(range(n_out + n_in))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k, j in zip(*np.nonzero(M)):
        a, b = find(k), find(n_out + j)
        if a != b:
            parent[a] = b
    groups = {}
    for k in range(n_out):
        groups.setdefault(find(k), ([], []))[0].append(k)
    for j in range(n_in):
        root = find(n_out + j)
        if root in groups:
            groups[root][1].append(j)
    return list(groups.values())


def _tensor_sum(func, center, M, axes_w, order, chunk_axis=True):
    """Sum of ``func(center + M[:, axes] @ w)`` over the tensor rule on ``axes``."""
    x, wt = _hermite_rule(order)
    dim = len(axes_w)
    if dim == 0:
        return float(func(center[None, :])[0])
    Ms = M[:, axes_w]
    if dim <= 2 or not chunk_axis:
        grid = np.stack(np.meshgrid(*([x] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
        weights = functools.reduce(np.multiply.outer, [wt] * dim).reshape(-1)
        values = func(center + grid @ Ms.T)
        # np.sum on a contiguous vector is pairwise, so the order is fixed
        return float(np.sum(weights * values))
    # chunk over the leading axis to bound memory; chunk sums added in node order
    rest = np.stack(np.meshgrid(*([x] * (dim - 1)), indexing="ij"), axis=-1).reshape(-1, dim - 1)
    rest_w = functools.reduce(np.multiply.outer, [wt] * (dim - 1)).reshape(-1)
    partial = np.empty(order)
    base = rest @ Ms[:, 1:].T
    for i in range(order):
        pts = center + x[i] * Ms[:, 0] + base
        partial[i] = wt[i] * np.sum(rest_w * func(pts))
    return float(np.sum(partial))


def _gh_value(F: SepGaussFunction, center, M, order) -> float:
    if F.is_separable:
        total = 1.0
        for coords, axes_w in _components(M):
            factors = [F.factors[k] for k in coords]
            sub_center = center[coords]
            sub_M = M[np.ix_(coords, range(M.shape[1]))]

            def block(pts, factors=factors):
                out = factors[0](pts[:, 0])
                for j in range(1, len(factors)):
                    out = out * factors[j](pts[:, j])
                return out

            total *= _tensor_sum(block, sub_center, sub_M, axes_w, order)
        return total
    return _tensor_sum(F, center, M, list(range(M.shape[1])), order)


def gh_resolution(F: SepGaussFunction, M, n: int) -> float:
    """Mapped node spacing over feature width, worst coordinate.

    Order-``n`` Gauss-Hermite nodes sit about ``pi / sqrt(2n)`` apart near
    the origin; coordinate ``k`` moves by ``|M[k]|`` per unit of ``w``. Above 1
    the rule steps over the Gaussian factor of that coordinate and its value
    is unreliable. Returns 0 for callables and constant factors.
    """
    if not F.is_separable:
        return 0.0
    M = np.asarray(M, dtype=float)
    spacing = math.pi / math.sqrt(2.0 * n)
    worst = 0.0
    for k, f in enumerate(F.factors):
        if not f.is_constant:
            worst = max(worst, spacing * float(np.linalg.norm(M[k])) / f.width)
    return worst


def gauss_hermite_expectation(F: SepGaussFunction, center, M, q: QuadratureSpec = QuadratureSpec(),
                              check: bool = True) -> QuadratureResult:
    """``pi^{-n/2} \\int d^n w exp(-|w|^2) F(center + M @ w)`` by tensor Gauss-Hermite.

    The error estimate is the difference between orders ``n`` and ``n // 2``
    while the rule is in its asymptotic regime, i.e. while that difference is
    smaller than the one between ``n // 2`` and ``n // 4``. Otherwise the
    smearing is still too wide for the rule to resolve F, and the estimate is
    the full spread of the three values.
    Separable functions are summed block by block over the coordinates that
    share quadrature axes, which is the same tensor sum regrouped.

    Differences between unresolved rules say nothing about the error, so when
    the node spacing mapped through ``M`` exceeds the width of a Gaussian
    factor (:func:`gh_resolution`) the estimate is replaced by the hard bound
    ``2 sup|F|``.
    """
    center = as_point(center)
    M = np.asarray(M, dtype=float)
    n = q.hermite_order
    value = _gh_value(F, center, M, n)
    coarse = _gh_value(F, center, M, max(n // 2, 1))
    estimate = abs(value - coarse)
    if n >= 4:
        coarser = _gh_value(F, center, M, n // 4)
        if estimate >= abs(coarse - coarser):
            estimate = max(estimate, abs(value - coarser))
    if gh_resolution(F, M, n) > 1.0:
        estimate = max(estimate, 2.0 * F.sup_bound)
    result = QuadratureResult(value, estimate, n)
    if check and result.error_estimate > max(q.rel_tol * abs(value), q.abs_tol):
        raise ConvergenceError(
            f"Gauss-Hermite order {n} not converged: estimate {result.error_estimate:.3e} "
            f"for value {value:.6e}", result)
    return result


def gaussian_expectation(F: SepGaussFunction, mean, cov) -> float:
    """Exact ``E[F(Z)]`` for ``Z ~ N(mean, cov)`` and separable ``F``.

    ``cov`` may be singular. Coordinates are grouped by the nonzero pattern of
    ``cov``; inside a group the product of factors is expanded into Gaussian
    monomials, each integrated with
    ``E[exp(-z^T P z)] = det(I + 2 S P)^{-1/2} exp(-d^T (I + 2 P S)^{-1} P d)``.
    """
    F.require_separable("closed-form smoothing")
    mean = as_point(mean)
    cov = np.asarray(cov, dtype=float)
    total = 1.0
    for coords, _ in _components(cov):
        block_sum = 0.0
        factors = [F.factors[k] for k in coords]
        for mask in itertools.product((False, True), repeat=len(coords)):
            coef = 1.0
            sel = []
            for f, gauss, k in zip(factors, mask, coords):
                if gauss:
                    if f.amplitude == 0:
                        coef = 0.0
                        break
                    coef *= f.amplitude
                    sel.append(k)
                else:
                    coef *= f.offset
            if coef == 0.0:
                continue
            if not sel:
                block_sum += coef
                continue
            S = cov[np.ix_(sel, sel)]
            P = np.diag([1.0 / F.factors[k].width ** 2 for k in sel])
            dvec = mean[sel] - np.array([F.factors[k].center for k in sel])
            I = np.eye(len(sel))
            A = I + 2.0 * P @ S
            quad = dvec @ np.linalg.solve(A, P @ dvec)
            block_sum += coef * math.exp(-quad) / math.sqrt(np.linalg.det(I + 2.0 * S @ P))
        total *= block_sum
        if total == 0.0:
            break
    return total


# --------------------------------------------------------------------------
# the composed map and its limits

def smooth(F: SepGaussFunction, r, params: PhysParams, q: QuadratureSpec = QuadratureSpec(),
           variant: str = DEFAULT_VARIANT, check: bool = True) -> QuadratureResult:
    """``F_{hbar,theta}(r)`` by tensor Gauss-Hermite quadrature."""
    L = kernel_widths(params, variant).transform()
    return gauss_hermite_expectation(F, r, L, q, check=check)


def smooth_closed_form(F: SepGaussFunction, r, params: PhysParams,
                       variant: str = DEFAULT_VARIANT) -> float:
    """Exact ``F_{hbar,theta}(r)`` on the separable family."""
    F.require_separable("smooth_closed_form")
    cov = kernel_widths(params, variant).covariance()
    return gaussian_expectation(F, r, cov)


def _theta0_transform(hbar: float, params: PhysParams) -> np.ndarray:
    mw = params.m_omega
    sx, sy = math.sqrt(2 * hbar / mw), math.sqrt(2 * hbar * mw)
    return np.diag([sx, sx, sy, sy])


def smooth_theta0(F: SepGaussFunction, r, hbar: float, params: PhysParams = PhysParams(),
                  q: QuadratureSpec = QuadratureSpec(), check: bool = True) -> QuadratureResult:
    """The theta -> 0 map: two independent oscillators with ``alpha = 1/(m omega)``.

    Positions are smeared with variance ``hbar/(m omega)``, momenta with
    ``hbar m omega``. Only ``mass`` and ``omega`` are read from ``params``.
    """
    if not hbar > 0:
        raise ParameterError("smooth_theta0 needs hbar > 0")
    return gauss_hermite_expectation(F, r, _theta0_transform(hbar, params), q, check=check)


def hbar0_scale(theta: float, params: PhysParams, convention: str = "displayed") -> float:
    """Momentum smearing scale ``sigma`` of the hbar -> 0 map, ``y + sigma v``.

    ``"displayed"`` is ``m omega sqrt(2 theta)``: the two-dimensional
    anti-Wick map with hbar replaced by ``m omega theta``. ``"limit"`` is
    ``2 m omega sqrt(theta)``: the actual hbar -> 0 limit of the momentum
    marginal of the four-dimensional kernel, whose variance is
    ``2 (m omega)^2 theta``.
    """
    mw = params.m_omega
    if convention == "displayed":
        return mw * math.sqrt(2 * theta)
    if convention == "limit":
        return 2 * mw * math.sqrt(theta)
    raise ValueError(f"unknown convention {convention!r}")


def smooth_hbar0(F: SepGaussFunction, r, theta: float, params: PhysParams = PhysParams(),
                 convention: str = "displayed") -> float:
    """The hbar -> 0 map: ``F_inf`` of the momenta, Gaussian-smeared.

    ``F_inf`` sends ``x1, x2`` to +infinity; the result depends on ``r`` only
    through ``(y1, y2)``.
    """
    if not theta > 0:
        raise ParameterError("smooth_hbar0 needs theta > 0")
    F.require_separable("smooth_hbar0")
    F_inf = f_infinity(F, ("x1", "x2"))
    sigma = hbar0_scale(theta, params, convention)
    cov = np.diag([0.0, 0.0, 0.5 * sigma**2, 0.5 * sigma**2])
    return gaussian_expectation(F_inf, as_point(r), cov)


def smooth_mc(F: SepGaussFunction, r, params: PhysParams, q: QuadratureSpec = QuadratureSpec(),
              variant: str = DEFAULT_VARIANT) -> MCResult:
    """Monte Carlo estimate of ``F_{hbar,theta}(r)`` with its standard error."""
    if q.mc_samples < 1000:
        raise ValueError("smooth_mc needs at least 1000 samples")
    L = kernel_widths(params, variant).transform()
    rng = np.random.default_rng(q.rng_seed)
    w = rng.standard_normal((q.mc_samples, 4)) / math.sqrt(2.0)
    values = F(as_point(r) + w @ L.T)
    mean = float(np.mean(values))
    std_error = float(np.std(values, ddof=1) / math.sqrt(q.mc_samples))
    return MCResult(mean, std_error, q.mc_samples, q.rng_seed)
