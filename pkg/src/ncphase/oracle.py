"""Truncated Fock-space model of the non-commutative oscillators.

The configuration space is the boson Fock space of ``b = (x1 + i x2)/sqrt(2 theta)``
cut at ``n_max`` levels. Quantum states are Hilbert-Schmidt operators on it,
i.e. ``n_max x n_max`` matrices ``psi``; superoperators act on ``psi.ravel()``
(row-major), so left multiplication by ``a`` is ``kron(a, 1)`` and right
multiplication is ``kron(1, a.T)``. Positions act from the left, momenta by
commutators. Everything here is built from those matrices alone and is used
as ground truth for the closed-form kernels elsewhere in the package.

Identities that only hold in the untruncated space are checked on a
low-lying subspace: the span of the number states ``|n1, n2>`` of the ladder
operators ``A1, A2`` with ``n1 + n2 <= level``. A residual "on the subspace"
is the spectral norm of ``Q^H M Q`` for an orthonormal basis ``Q``.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .dynamics import evolution_matrix, weyl_label_flow
from .params import DerivedParams, ParameterError, PhysParams, derive
from .smoothing import VARIANTS, label_matrix, overlap_exponent, variant_exponent

__all__ = [
    "FockTruncation",
    "TruncationError",
    "TruncationWarning",
    "PhaseSpaceOps",
    "LadderOps",
    "CheckResult",
    "KernelFitReport",
    "ResolutionResult",
    "ORACLE_REFERENCE",
    "build_ladder",
    "build_phase_space_ops",
    "build_A_ops",
    "ground_state",
    "FockOracle",
    "TOLERANCES",
    "minimal_n_max",
    "select_variant",
]

#: reference point where n_max = 12 passes the ground-state tail criterion
ORACLE_REFERENCE = PhysParams(hbar=0.25, theta=1.0, mass=1.0, omega=1.0)

#: pass thresholds of the check suite
TOLERANCES = {
    "ladder_commutator": 1e-12,
    "heisenberg_algebra": 1e-10,
    "ladder_A_algebra": 1e-8,
    "inverse_relations": 1e-10,
    "ground_state": 1e-8,
    "ground_state_trace": 1e-10,
    "weyl_unitarity": 1e-9,
    "coherent_eigen": 1e-6,
    "weyl_compose": 1e-8,
    "kernel_fit": 1e-5,
    "label_determinant": 1e-12,
    "hamiltonian": 1e-8,
    "evolve": 1e-6,
    "ground_invariance": 1e-9,
    "resolution": 1e-3,
}

DENSE_N_MAX = 16


class TruncationError(RuntimeError):
    """The truncation cannot represent the ground state to the required accuracy."""


class TruncationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class FockTruncation:
    n_max: int = 12

    def __post_init__(self):
        if not 4 <= self.n_max <= 64:
            raise ValueError("n_max must lie in [4, 64]")

    @property
    def hs_dim(self) -> int:
        return self.n_max**2


class PhaseSpaceOps(NamedTuple):
    X1: sp.csr_matrix
    X2: sp.csr_matrix
    P1: sp.csr_matrix
    P2: sp.csr_matrix


class LadderOps(NamedTuple):
    A1: sp.csr_matrix
    A2: sp.csr_matrix
    A1_dag: sp.csr_matrix
    A2_dag: sp.csr_matrix


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.residual < self.tolerance)

    def as_dict(self) -> dict:
        return {"check_name": self.name, "residual": self.residual,
                "tolerance": self.tolerance, "passed": self.passed, **self.details}


def build_ladder(trunc: FockTruncation):
    """Truncated ``b`` and ``b^dagger`` on the configuration Fock space."""
    b = np.diag(np.sqrt(np.arange(1, trunc.n_max, dtype=float)), 1).astype(complex)
    return b, b.conj().T


def _left(a, n):
    return sp.kron(sp.csr_matrix(a), sp.identity(n, format="csr"), format="csr")


def _right(a, n):
    return sp.kron(sp.identity(n, format="csr"), sp.csr_matrix(np.asarray(a).T), format="csr")


def _require_oracle_params(params: PhysParams):
    if not (params.hbar > 0 and params.theta > 0):
        raise ParameterError("the Fock-space oracle needs hbar > 0 and theta > 0")


def build_phase_space_ops(trunc: FockTruncation, params: PhysParams) -> PhaseSpaceOps:
    _require_oracle_params(params)
    n, theta, hbar = trunc.n_max, params.theta, params.hbar
    b, bd = build_ladder(trunc)
    x1 = math.sqrt(theta / 2) * (b + bd)
    x2 = 1j * math.sqrt(theta / 2) * (bd - b)
    X1, X2 = _left(x1, n), _left(x2, n)
    P1 = (hbar / theta) * (X2 - _right(x2, n))
    P2 = -(hbar / theta) * (X1 - _right(x1, n))
    return PhaseSpaceOps(X1, X2, P1.tocsr(), P2.tocsr())


def build_A_ops(trunc: FockTruncation, params: PhysParams,
                derived: Optional[DerivedParams] = None, ops: Optional[PhaseSpaceOps] = None) -> LadderOps:
    _require_oracle_params(params)
    d = derived or derive(params)
    X1, X2, P1, P2 = ops or build_phase_space_ops(trunc, params)
    hbar = params.hbar
    lp, lm = d.lambda_plus / hbar, d.lambda_minus / hbar
    A1 = (-lp * X1 - 1j * P1 - 1j * lp * X2 + P2) / math.sqrt(d.K_plus)
    A1d = (-lp * X1 + 1j * P1 + 1j * lp * X2 + P2) / math.sqrt(d.K_plus)
    A2 = (lm * X1 + 1j * P1 - 1j * lm * X2 + P2) / math.sqrt(d.K_minus)
    A2d = (lm * X1 - 1j * P1 + 1j * lm * X2 + P2) / math.sqrt(d.K_minus)
    return LadderOps(A1.tocsr(), A2.tocsr(), A1d.tocsr(), A2d.tocsr())


def ground_state(trunc: FockTruncation, params: PhysParams, derived: Optional[DerivedParams] = None,
                 tail_tol: float = 1e-14) -> np.ndarray:
    """Normalised Hilbert-Schmidt ground state as an ``n_max x n_max`` matrix.

    ``psi0`` is diagonal with entries ``exp(beta (n + 1/2))``. Raises
    :class:`TruncationError` unless ``exp(beta n_max) < tail_tol``.
    """
    _require_oracle_params(params)
    d = derived or derive(params)
    tail = math.exp(d.beta * trunc.n_max)
    if not tail < tail_tol:
        raise TruncationError(
            f"n_max={trunc.n_max} too small for beta={d.beta:.4g}: "
            f"exp(beta n_max) = {tail:.3e} >= {tail_tol:.1e}")
    diag = np.exp(d.beta * (np.arange(trunc.n_max) + 0.5))
    psi = np.diag(diag).astype(complex)
    return psi / np.linalg.norm(diag)


def _dagger(M):
    return M.conj().T


def _compressed_norm(M, Q) -> float:
    return float(np.linalg.norm(_dagger(Q) @ (M @ Q), 2))


@dataclass
class KernelFitReport:
    """Oracle overlaps against closed-form kernels for sampled pairs."""

    params: PhysParams
    n_max: int
    pairs: np.ndarray            # shape (n, 2, 4)
    oracle: np.ndarray           # |<z_r|z_r'>|^2
    predictions: dict            # name -> exp(-E) array; "expon" and each variant
    selected: str = ""

    def __post_init__(self):
        if not self.selected:
            self.selected = min(VARIANTS, key=lambda v: self.sse(v))

    def rel_errors(self, name: str) -> np.ndarray:
        return np.abs(self.oracle - self.predictions[name]) / self.predictions[name]

    def sse(self, name: str) -> float:
        return float(np.sum((np.log(self.oracle) - np.log(self.predictions[name])) ** 2))

    def max_rel_error(self, name: Optional[str] = None) -> float:
        return float(self.rel_errors(name or self.selected).max())

    def rows(self):
        header = ["x1", "x2", "y1", "y2", "x1p", "x2p", "y1p", "y2p", "oracle",
                  "variant_A", "variant_B", "expon"]
        body = []
        for (r, rp), o, a, b, e in zip(self.pairs, self.oracle, self.predictions["A"],
                                       self.predictions["B"], self.predictions["expon"]):
            body.append([*r, *rp, o, a, b, e])
        return header, body


@dataclass
class ResolutionResult:
    matrix: np.ndarray           # <n1 n2| I |m1 m2>, states ordered by (n1, n2)
    labels: list
    order: int
    quadrature_error: float      # change when the order is raised by one
    box_radius: float            # largest |r|_inf among the quadrature nodes
    jacobian_formula: float
    jacobian_numeric: float

    def element(self, n1, n2, m1, m2) -> complex:
        i, j = self.labels.index((n1, n2)), self.labels.index((m1, m2))
        return complex(self.matrix[i, j])

    @property
    def max_deviation(self) -> float:
        return float(np.abs(self.matrix - np.eye(len(self.labels))).max())


class FockOracle:
    """All operators of the model at one parameter point and truncation."""

    def __init__(self, params: PhysParams, n_max: int = 12, tail_tol: float = 1e-14,
                 edge_tol: float = 1e-10):
        _require_oracle_params(params)
        self.edge_tol = edge_tol
        self.params = params
        self.trunc = FockTruncation(n_max)
        self.derived = derive(params)
        self.tail_tol = tail_tol
        self.ops = build_phase_space_ops(self.trunc, params)
        self.A = build_A_ops(self.trunc, params, self.derived, self.ops)
        self.psi0_matrix = ground_state(self.trunc, params, self.derived, tail_tol)
        self.psi0 = self.psi0_matrix.ravel()
        self.J = label_matrix(params, self.derived)
        self._identity = sp.identity(self.trunc.hs_dim, dtype=complex, format="csr")

    @property
    def n_max(self) -> int:
        return self.trunc.n_max

    @property
    def mu(self) -> float:
        return self.derived.mu

    # -- states ------------------------------------------------------------

    def number_state(self, n1: int, n2: int) -> np.ndarray:
        v = self.psi0.copy()
        for _ in range(n1):
            v = self.A.A1_dag @ v
        for _ in range(n2):
            v = self.A.A2_dag @ v
        return v / math.sqrt(math.factorial(n1) * math.factorial(n2))

    @functools.lru_cache(maxsize=8)
    def low_lying_basis(self, level: Optional[int] = None) -> np.ndarray:
        level = self.n_max // 2 if level is None else level
        states = [self.number_state(a, b) for a in range(level + 1) for b in range(level + 1 - a)]
        Q, _ = np.linalg.qr(np.array(states).T)
        return Q

    # -- Weyl operators and coherent states ----------------------------------

    def generator(self, r) -> sp.csr_matrix:
        """``(i/mu) (r, Omega r_hat) = (i/mu)(x1 P1 + x2 P2 - y1 X1 - y2 X2)``."""
        x1, x2, y1, y2 = np.asarray(r, dtype=float)
        X1, X2, P1, P2 = self.ops
        return ((1j / self.mu) * (x1 * P1 + x2 * P2 - y1 * X1 - y2 * X2)).tocsr()

    def weyl_op(self, r) -> np.ndarray:
        """Dense Weyl superoperator ``exp((i/mu)(r, Omega r_hat))``."""
        if self.n_max > DENSE_N_MAX:
            raise ValueError(f"dense superoperator exponentials need n_max <= {DENSE_N_MAX}")
        W = scipy.linalg.expm(self.generator(r).toarray())
        res = self.unitarity_residual(W)
        if res > TOLERANCES["weyl_unitarity"]:
            warnings.warn(f"Weyl operator not unitary on the low-lying subspace ({res:.2e})",
                          TruncationWarning, stacklevel=2)
        return W

    def unitarity_residual(self, W) -> float:
        Q = self.low_lying_basis()
        return _compressed_norm(_dagger(W) @ W - np.eye(W.shape[0]), Q)

    def coherent_state(self, r) -> np.ndarray:
        """``W(r)|0,0>`` via the action of the exponential on the ground state."""
        v = expm_multiply(self.generator(r), self.psi0)
        edge = np.abs(v.reshape(self.n_max, self.n_max))
        boundary = float(np.sum(edge[-1, :] ** 2) + np.sum(edge[:, -1] ** 2))
        if boundary > self.edge_tol:
            warnings.warn(f"coherent state reaches the truncation edge (weight {boundary:.2e})",
                          TruncationWarning, stacklevel=2)
        return v

    def label(self, r) -> np.ndarray:
        """Predicted coherent label ``(Re z1, Re z2, Im z1, Im z2) = J r``."""
        return self.J @ np.asarray(r, dtype=float)

    def coherent_eigen_residual(self, r) -> float:
        v = self.coherent_state(r)
        z = self.label(r)
        z1, z2 = z[0] + 1j * z[2], z[1] + 1j * z[3]
        return float(max(np.linalg.norm(self.A.A1 @ v - z1 * v), np.linalg.norm(self.A.A2 @ v - z2 * v)))

    def overlap(self, r, r_prime) -> complex:
        return complex(np.vdot(self.coherent_state(r), self.coherent_state(r_prime)))

    def symplectic_phase(self, r, r_prime) -> float:
        """``sigma(r, r')`` with ``[G(r), G(r')] = -i sigma / mu^2`` from the algebra."""
        x, y = np.asarray(r[:2], float), np.asarray(r[2:], float)
        xp, yp = np.asarray(r_prime[:2], float), np.asarray(r_prime[2:], float)
        return float(self.params.hbar * (x @ yp - y @ xp) + self.params.theta * (y[0] * yp[1] - y[1] * yp[0]))

    def weyl_compose(self, r, r_prime) -> dict:
        """Measure the scalar phase in ``W(r) W(r') = e^{i phi} W(r + r')``.

        Reported next to the Baker-Campbell-Hausdorff value
        ``-sigma(r, r') / (2 mu^2)`` and the literature formula
        ``-(hbar + theta) mu^2 (r, Omega r') / 2``.
        """
        r, r_prime = np.asarray(r, float), np.asarray(r_prime, float)
        lhs = expm_multiply(self.generator(r), expm_multiply(self.generator(r_prime), self.psi0))
        rhs = self.coherent_state(r + r_prime)
        ratio = np.vdot(rhs, lhs)
        measured = float(np.angle(ratio))
        bch = -self.symplectic_phase(r, r_prime) / (2 * self.mu**2)
        omega_form = r[0] * r_prime[2] + r[1] * r_prime[3] - r[2] * r_prime[0] - r[3] * r_prime[1]
        literature = -(self.params.hbar + self.params.theta) * self.mu**2 * omega_form / 2
        return {"measured_phase": measured, "bch_phase": bch, "literature_phase": float(literature),
                "modulus": float(abs(ratio)),
                "residual": float(abs(np.angle(np.exp(1j * (measured - bch)))))}

    # -- algebra checks ------------------------------------------------------

    def config_basis(self, level: Optional[int] = None) -> np.ndarray:
        """Orthonormal basis of HS matrices supported on Fock levels ``<= level`` of ``b``."""
        level = self.n_max // 2 if level is None else level
        idx = [i * self.n_max + j for i in range(level + 1) for j in range(level + 1)]
        return np.eye(self.trunc.hs_dim, dtype=complex)[:, idx]

    def heisenberg_residuals(self, level: Optional[int] = None) -> dict:
        """Heisenberg algebra on HS matrices supported on ``n <= level`` of ``b``."""
        Q = self.config_basis(level)
        X1, X2, P1, P2 = self.ops
        hbar, theta = self.params.hbar, self.params.theta
        I = self._identity
        comm = lambda a, b: a @ b - b @ a
        return {
            "[X1,X2]-i theta": _compressed_norm(comm(X1, X2) - 1j * theta * I, Q),
            "[X1,P1]-i hbar": _compressed_norm(comm(X1, P1) - 1j * hbar * I, Q),
            "[X2,P2]-i hbar": _compressed_norm(comm(X2, P2) - 1j * hbar * I, Q),
            "[X1,P2]": _compressed_norm(comm(X1, P2), Q),
            "[X2,P1]": _compressed_norm(comm(X2, P1), Q),
            "[P1,P2]": _compressed_norm(comm(P1, P2), Q),
        }

    def ladder_residuals(self, level: Optional[int] = None) -> dict:
        Q = self.low_lying_basis(level)
        A1, A2, A1d, A2d = self.A
        I = self._identity
        comm = lambda a, b: a @ b - b @ a
        return {
            "[A1,A1+]-1": _compressed_norm(comm(A1, A1d) - I, Q),
            "[A2,A2+]-1": _compressed_norm(comm(A2, A2d) - I, Q),
            "[A1,A2+]": _compressed_norm(comm(A1, A2d), Q),
            "[A2,A1+]": _compressed_norm(comm(A2, A1d), Q),
            "[A1,A2]": _compressed_norm(comm(A1, A2), Q),
            "A1+ - (A1)^H": float(sp.linalg.norm(A1d - _dagger(A1))),
            "A2+ - (A2)^H": float(sp.linalg.norm(A2d - _dagger(A2))),
        }

    def inverse_relation_residuals(self, level: Optional[int] = None) -> dict:
        """Rebuild X_i, P_i from the ladder operators and compare."""
        Q = self.low_lying_basis(level)
        d, hbar = self.derived, self.params.hbar
        A1, A2, A1d, A2d = self.A
        sKp, sKm = math.sqrt(d.K_plus), math.sqrt(d.K_minus)
        lp, lm = d.lambda_plus, d.lambda_minus
        s = 2 * (lp + lm)
        rebuilt = {
            "X1": hbar / s * (sKm * (A2 + A2d) - sKp * (A1 + A1d)),
            "X2": -hbar / (1j * s) * (sKp * (A1 - A1d) + sKm * (A2 - A2d)),
            "P1": 1 / (1j * s) * (lp * sKm * (A2 - A2d) - lm * sKp * (A1 - A1d)),
            "P2": 1 / s * (lp * sKm * (A2 + A2d) + lm * sKp * (A1 + A1d)),
        }
        return {k: _compressed_norm(v - getattr(self.ops, k), Q) for k, v in rebuilt.items()}

    def ground_state_residual(self) -> float:
        return float(max(np.linalg.norm(self.A.A1 @ self.psi0), np.linalg.norm(self.A.A2 @ self.psi0)))

    # -- Hamiltonian and dynamics --------------------------------------------

    def hamiltonian_e7(self) -> sp.csr_matrix:
        X1, X2, P1, P2 = self.ops
        m, w = self.params.mass, self.params.omega
        return ((P1 @ P1 + P2 @ P2) / (2 * m) + 0.5 * m * w**2 * (X1 @ X1 + X2 @ X2)).tocsr()

    def hamiltonian_e8(self) -> sp.csr_matrix:
        A1, A2, A1d, A2d = self.A
        d, m = self.derived, self.params.mass
        return ((d.lambda_plus / m) * (A1d @ A1) + (d.lambda_minus / m) * (A2d @ A2)
                + (d.lambda_plus + d.lambda_minus) / (2 * m) * self._identity).tocsr()

    def hamiltonian_check(self, level: Optional[int] = None) -> CheckResult:
        Q = self.low_lying_basis(level)
        H7, H8 = self.hamiltonian_e7(), self.hamiltonian_e8()
        rel = _compressed_norm(H7 - H8, Q) / _compressed_norm(H8, Q)
        e = lambda v: float(np.vdot(v, H7 @ v).real)
        E00 = e(self.psi0)
        gap_plus = e(self.number_state(1, 0)) - E00
        gap_minus = e(self.number_state(0, 1)) - E00
        d, m = self.derived, self.params.mass
        return CheckResult("hamiltonian", rel, TOLERANCES["hamiltonian"], {
            "ground_energy": E00, "ground_energy_expected": (d.lambda_plus + d.lambda_minus) / (2 * m),
            "gap_plus": gap_plus, "gap_plus_expected": d.lambda_plus / m,
            "gap_minus": gap_minus, "gap_minus_expected": d.lambda_minus / m,
            "omega_plus_measured": gap_plus / self.mu, "omega_minus_measured": gap_minus / self.mu,
        })

    def evolutor(self, t: float) -> np.ndarray:
        if self.n_max > DENSE_N_MAX:
            raise ValueError(f"dense evolutor needs n_max <= {DENSE_N_MAX}")
        return scipy.linalg.expm(-1j * t / self.mu * self.hamiltonian_e7().toarray())

    def evolve_check(self, r, t: float, level: Optional[int] = None) -> CheckResult:
        """``U_t^dagger W(r) U_t`` against ``W(T_t r)`` on the low-lying subspace.

        ``T_t`` is :func:`ncphase.dynamics.weyl_label_flow`. The residual
        against the block matrix ``W(A_{-t} r)`` is reported alongside.
        """
        r = np.asarray(r, float)
        Q = self.low_lying_basis(level)
        U = self.evolutor(t)
        lhs = _dagger(U) @ self.weyl_op(r) @ U
        T = weyl_label_flow(t, self.params, self.derived)
        A_back = evolution_matrix(-t, self.params, self.derived).matrix
        res = _compressed_norm(lhs - self.weyl_op(T @ r), Q)
        res_block = _compressed_norm(lhs - self.weyl_op(A_back @ r), Q)
        phase = np.vdot(self.psi0, U @ self.psi0)
        ground_dev = float(np.linalg.norm(U @ self.psi0 - phase * self.psi0))
        return CheckResult("evolve", res, TOLERANCES["evolve"], {
            "t": float(t), "block_matrix_residual": res_block, "ground_invariance": ground_dev})

    # -- kernel and resolution of identity -----------------------------------

    def kernel_fit(self, n_pairs: int = 100, radius: float = 1.0, seed: int = 0) -> KernelFitReport:
        """Sample pairs in the ball ``|r| <= radius`` and compare kernels."""
        rng = np.random.default_rng(seed)

        def ball(k):
            v = rng.standard_normal((k, 4))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            return v * radius * rng.uniform(size=(k, 1)) ** 0.25

        r, rp = ball(n_pairs), ball(n_pairs)
        oracle = np.array([abs(self.overlap(a, b)) ** 2 for a, b in zip(r, rp)])
        preds = {"expon": np.exp(-overlap_exponent(r, rp, self.params))}
        for v in VARIANTS:
            preds[v] = np.exp(-variant_exponent(r, rp, self.params, v))
        return KernelFitReport(self.params, self.n_max, np.stack([r, rp], axis=1), oracle, preds)

    def resolution_matrix(self, max_level: int = 3, order: Optional[int] = None) -> ResolutionResult:
        """``(J/pi^2) \\int d^4r <n|z_r><z_r|m>`` for ``n, m`` up to ``max_level``.

        The integral is taken in label coordinates ``zeta = J_hat r`` with a
        tensor Gauss-Hermite rule matched to the coherent-state Gaussian;
        the default order is exact for the polynomial part of the integrand.
        """
        labels = [(a, b) for a in range(max_level + 1) for b in range(max_level + 1)]
        basis = np.array([self.number_state(a, b) for a, b in labels])
        order = order or max_level + 1
        J_formula = self.derived.J_det
        J_numeric = abs(float(np.linalg.det(self.J)))
        J_use = J_formula
        if abs(J_formula - J_numeric) > TOLERANCES["label_determinant"] * J_numeric:
            warnings.warn(f"label-map determinant {J_numeric!r} differs from {J_formula!r}; using it",
                          TruncationWarning, stacklevel=2)
            J_use = J_numeric

        def integrate(k):
            x, w = np.polynomial.hermite.hermgauss(k)
            Jinv = np.linalg.inv(self.J)
            total = np.zeros((len(labels), len(labels)), dtype=complex)
            box = 0.0
            for idx in itertools.product(range(k), repeat=4):
                zeta = x[list(idx)]
                weight = float(np.prod(w[list(idx)])) * math.exp(zeta @ zeta)
                r = Jinv @ zeta
                box = max(box, float(np.abs(r).max()))
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", TruncationWarning)
                    amp = basis.conj() @ self.coherent_state(r)
                total += weight * np.outer(amp, amp.conj())
            return total * (J_use / J_numeric) / math.pi**2, box

        matrix, box = integrate(order)
        finer, _ = integrate(order + 1)
        return ResolutionResult(matrix, labels, order, float(np.abs(finer - matrix).max()), box,
                                J_formula, J_numeric)

    def resolution_check(self, n1, n2, m1, m2, order: Optional[int] = None) -> complex:
        level = max(n1, n2, m1, m2)
        return self.resolution_matrix(level, order).element(n1, n2, m1, m2)

    # -- suite ---------------------------------------------------------------

    def run_checks(self, seed: int = 0, n_pairs: int = 100, include_resolution: bool = False):
        """Run the residual checks; returns a list of :class:`CheckResult`."""
        rng = np.random.default_rng(seed)
        out = []
        n = self.n_max
        b, bd = build_ladder(self.trunc)
        comm = (b @ bd - bd @ b)[: n - 1, : n - 1]
        out.append(CheckResult("ladder_commutator", float(np.abs(comm - np.eye(n - 1)).max()),
                               TOLERANCES["ladder_commutator"]))
        h = self.heisenberg_residuals()
        out.append(CheckResult("heisenberg_algebra", max(h.values()), TOLERANCES["heisenberg_algebra"], h))
        a = self.ladder_residuals()
        out.append(CheckResult("ladder_A_algebra", max(a.values()), TOLERANCES["ladder_A_algebra"], a))
        inv = self.inverse_relation_residuals()
        out.append(CheckResult("inverse_relations", max(inv.values()), TOLERANCES["inverse_relations"], inv))
        out.append(CheckResult("ground_state", self.ground_state_residual(), TOLERANCES["ground_state"]))
        levels = np.arange(200)
        series = float(np.sum(np.exp(self.derived.beta * (2 * levels + 1))))
        closed = self.derived.ground_state_trace
        out.append(CheckResult("ground_state_trace", abs(series - closed) / closed,
                               TOLERANCES["ground_state_trace"],
                               {"trace": closed, "norm_N": self.derived.norm_N,
                                "norm_N_over_trace": self.derived.norm_N / closed}))
        J_num = abs(float(np.linalg.det(self.J)))
        out.append(CheckResult("label_determinant", abs(J_num - self.derived.J_det) / J_num,
                               TOLERANCES["label_determinant"]))
        rs = [rng.uniform(-1, 1, 4) / 2 for _ in range(3)]
        if n <= DENSE_N_MAX:
            out.append(CheckResult("weyl_unitarity", max(self.unitarity_residual(self.weyl_op(r)) for r in rs),
                                   TOLERANCES["weyl_unitarity"]))
        out.append(CheckResult("coherent_eigen", max(self.coherent_eigen_residual(r) for r in rs),
                               TOLERANCES["coherent_eigen"]))
        comp = self.weyl_compose(rs[0], rs[1])
        out.append(CheckResult("weyl_compose", comp["residual"], TOLERANCES["weyl_compose"], comp))
        fit = self.kernel_fit(n_pairs=n_pairs, seed=seed)
        out.append(CheckResult("kernel_fit", fit.max_rel_error(), TOLERANCES["kernel_fit"],
                               {"selected_variant": fit.selected,
                                **{f"max_rel_error_{k}": fit.max_rel_error(k) for k in fit.predictions}}))
        out.append(self.hamiltonian_check())
        if n <= DENSE_N_MAX:
            t = float(rng.uniform(0.1, 3.0))
            ev = self.evolve_check(rs[2], t)
            out.append(ev)
            out.append(CheckResult("ground_invariance", ev.details["ground_invariance"],
                                   TOLERANCES["ground_invariance"]))
        if include_resolution:
            res = self.resolution_matrix(3)
            out.append(CheckResult("resolution", res.max_deviation, TOLERANCES["resolution"],
                                   {"quadrature_error": res.quadrature_error, "box_radius": res.box_radius}))
        return out


def minimal_n_max(params: PhysParams, tail_tol: float = 1e-14, lower: int = 12) -> int:
    """Smallest truncation (at least ``lower``) meeting the ground-state tail criterion."""
    beta = derive(params).beta
    return max(lower, int(math.floor(math.log(tail_tol) / beta)) + 1)


@functools.lru_cache(maxsize=32)
def select_variant(params: PhysParams, n_pairs: int = 100, seed: int = 0, n_max_cap: int = 40) -> str:
    """Kernel variant preferred by the oracle overlap fit at ``params``.

    Raises :class:`TruncationError` when the needed truncation exceeds ``n_max_cap``.
    """
    n = minimal_n_max(params)
    if n > n_max_cap:
        raise TruncationError(f"oracle needs n_max={n} > {n_max_cap} at these parameters")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return FockOracle(params, n).kernel_fit(n_pairs=n_pairs, seed=seed).selected
