"""Dirichlet-Laplacian eigenbasis on (0,1): truncated states, Sobolev norms,
and the position-squared coupling operator with its operator-norm estimates.

Conventions: eigenfunctions phi_k(x) = sqrt(2) sin(pi k x), eigenvalues
lambda_k = pi^2 k^2, k = 1, 2, ...  A truncated state is the coefficient
vector c_k = <phi_k, psi> for k <= cutoff.  The weighted coefficient norm
of order s is (sum |(pi k)^s c_k|^2)^(1/2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

__all__ = [
    "ModalState",
    "CouplingOperator",
    "NormEstimate",
    "CouplingDecayBound",
    "eigenvalue",
    "basis_state",
    "free_evolve",
    "sobolev_norm",
    "coupling_x2",
    "x2_entry",
    "operator_norm",
    "coupling_decay_constant",
    "h3_intersection_norm",
]

NORMALIZATION_TOL = 1e-9


def eigenvalue(k: int) -> float:
    """Eigenvalue pi^2 k^2 of the Dirichlet Laplacian on (0,1)."""
    if k < 1:
        raise ValueError(f"mode index must be a positive integer, got {k}")
    return np.pi**2 * k**2


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModalState:
    """Truncated eigenbasis representation of a wave function.

    coeffs[i] is the amplitude on mode k = i+1; time is the reference time
    (dimensionless units) at which the coefficients are taken.
    """

    cutoff: int
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))
        if self.coeffs.shape != (self.cutoff,):
            raise ValueError(
                f"expected {self.cutoff} coefficients, got shape {self.coeffs.shape}"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm**2 - 1.0) <= NORMALIZATION_TOL

    @property
    def tail_mass(self) -> float:
        """Population on the top two modes; a truncation-health metric."""
        return float(np.sum(np.abs(self.coeffs[-2:]) ** 2))

    def to_json_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
            "time": float(self.time),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def basis_state(cutoff: int, k: int, time: float = 0.0) -> ModalState:
    """The k-th eigenstate as a truncated state."""
    if not 1 <= k <= cutoff:
        raise ValueError(f"mode {k} outside truncation 1..{cutoff}")
    c = np.zeros(cutoff, dtype=complex)
    c[k - 1] = 1.0
    return ModalState(cutoff=cutoff, coeffs=c, time=time)


def free_evolve(state: ModalState, dt: float) -> ModalState:
    """Evolve under the Laplacian alone: c_k -> c_k e^{-i lambda_k dt}."""
    k = np.arange(1, state.cutoff + 1)
    phase = np.exp(-1j * np.pi**2 * k**2 * dt)
    return ModalState(
        cutoff=state.cutoff, coeffs=state.coeffs * phase, time=state.time + dt
    )


def sobolev_norm(state: ModalState, s: float) -> float:
    """Weighted coefficient norm (sum_k |(pi k)^s c_k|^2)^(1/2), s >= 0."""
    if s < 0:
        raise ValueError(f"order must be nonnegative, got {s}")
    k = np.arange(1, state.cutoff + 1, dtype=float)
    return float(np.linalg.norm((np.pi * k) ** s * state.coeffs))


@dataclass(frozen=True)
class CouplingOperator:
    """Real symmetric matrix of a bounded coupling operator in the eigenbasis.

    generator tags an analytic family; "x_squared" means entries extend
    beyond the cutoff via the closed form (see x2_entry).
    """

    cutoff: int
    entries: np.ndarray
    generator: Optional[str] = None

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        if e.shape != (self.cutoff, self.cutoff):
            raise ValueError(f"expected {self.cutoff}x{self.cutoff} matrix")

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    def entry(self, j: int, k: int) -> float:
        """B_{j,k}; uses the analytic generator when an index exceeds the cutoff."""
        if j <= self.cutoff and k <= self.cutoff:
            return float(self.entries[j - 1, k - 1])
        if self.generator == "x_squared":
            return x2_entry(j, k)
        raise IndexError(f"({j},{k}) outside cutoff {self.cutoff} and no generator")

    def to_json_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "entries": [float(v) for v in self.entries.ravel()],
            "generator": self.generator,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def x2_entry(j: int, k: int) -> float:
    """Closed-form eigenbasis entry <phi_j, x^2 phi_k> on (0,1).

    Derivation: 2 sin(a)sin(b) = cos(a-b) - cos(a+b) and
    int_0^1 x^2 cos(m pi x) dx = 2(-1)^m/(m^2 pi^2) for integer m != 0,
    giving (-1)^(j+k) * 8jk / ((j^2-k^2)^2 pi^2) off the diagonal and
    1/3 - 1/(2 k^2 pi^2) on it.
    """
    if j < 1 or k < 1:
        raise ValueError("indices must be positive")
    if j == k:
        return 1.0 / 3.0 - 1.0 / (2.0 * k**2 * np.pi**2)
    return ((-1.0) ** (j + k)) * 8.0 * j * k / ((j**2 - k**2) ** 2 * np.pi**2)


def coupling_x2(N: int) -> CouplingOperator:
    """Coupling matrix of the multiplication operator psi -> x^2 psi."""
    if N < 1:
        raise ValueError(f"cutoff must be >= 1, got {N}")
    j = np.arange(1, N + 1, dtype=float)[:, None]
    k = np.arange(1, N + 1, dtype=float)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        off = ((-1.0) ** (j + k)) * 8.0 * j * k / ((j**2 - k**2) ** 2 * np.pi**2)
    diag = 1.0 / 3.0 - 1.0 / (2.0 * k**2 * np.pi**2)
    entries = np.where(j == k, diag, off)
    # exact symmetry bit-for-bit
    entries = np.triu(entries) + np.triu(entries, 1).T
    return CouplingOperator(cutoff=N, entries=entries, generator="x_squared")


@dataclass(frozen=True)
class NormEstimate:
    value: float
    kind: str  # one of L2 | H2_op | H3_op
    cutoff_used: int
    converged: bool  # relative change < 1e-6 between cutoff and 2*cutoff


_CONVERGENCE_RTOL = 1e-6


def _x2_matrix(N: int) -> np.ndarray:
    return coupling_x2(N).entries


def _l2_norm(entries: np.ndarray) -> float:
    return float(np.linalg.svd(entries, compute_uv=False)[0])


def _h2_weighted_norm(entries: np.ndarray) -> float:
    """Largest singular value of W B W^{-1} with W = diag((pi k)^2)."""
    N = entries.shape[0]
    w = (np.pi * np.arange(1, N + 1)) ** 2
    return _l2_norm(entries * np.outer(w, 1.0 / w))


def _h3_quadrature_form(N: int, quad_points: Optional[int] = None) -> np.ndarray:
    """Gram matrix Q of the first three derivatives of x^2 psi.

    Q[j,k] = sum_{m=1..3} <d^m/dx^m (x^2 phi_j), d^m/dx^m (x^2 phi_k)>,
    assembled by Gauss-Legendre quadrature on (0,1).
    """
    nq = quad_points or max(64, 4 * N)
    xg, wg = np.polynomial.legendre.leggauss(nq)
    x = (xg + 1.0) / 2.0
    w = wg / 2.0
    pk = np.pi * np.arange(1, N + 1)
    s = np.sqrt(2.0) * np.sin(np.outer(x, pk))
    c = np.sqrt(2.0) * np.cos(np.outer(x, pk))
    x1 = x[:, None]
    x2 = (x**2)[:, None]
    # d/dx, d2/dx2, d3/dx3 of x^2*phi_k (product rule on sqrt(2) x^2 sin(pk x))
    F1 = 2.0 * x1 * s + pk * x2 * c
    F2 = 2.0 * s + 4.0 * pk * x1 * c - pk**2 * x2 * s
    F3 = 6.0 * pk * c - 6.0 * pk**2 * x1 * s - pk**3 * x2 * c
    Q = np.zeros((N, N))
    for F in (F1, F2, F3):
        Q += (F * w[:, None]).T @ F
    return 0.5 * (Q + Q.T)


def _h3_operator_norm(N: int) -> float:
    """sup ||x^2 psi||_{H3 cap H1_0} / ||psi||_(3) over the truncation.

    The ratio of two quadratic forms c^H Q c / c^H G c with G = diag((pi k)^6)
    reduces to the top eigenvalue of Q scaled by g g^T, g = (pi k)^3.
    """
    Q = _h3_quadrature_form(N)
    g = (np.pi * np.arange(1, N + 1)) ** 3
    Qs = Q / np.outer(g, g)
    return float(np.sqrt(np.linalg.eigvalsh(Qs)[-1]))


def h3_intersection_norm(state: ModalState, quad_points: Optional[int] = None) -> float:
    """||x^2 psi||_{H3 cap H1_0} = (sum_{m=1..3} ||d^m(x^2 psi)||^2)^(1/2)."""
    Q = _h3_quadrature_form(state.cutoff, quad_points)
    c = state.coeffs
    return float(np.sqrt(np.real(np.conj(c) @ Q @ c)))


def operator_norm(B: CouplingOperator, kind: str) -> NormEstimate:
    """Numerical operator norm of the coupling over the truncation.

    kind "L2": largest singular value of the matrix.
    kind "H2_op": largest singular value of the (pi k)^2-similarity-transformed
    matrix (operator norm in the order-2 weighted space).
    kind "H3_op": sup of ||x^2 psi||_{H3 cap H1_0} / ||psi||_(3), by quadrature;
    requires the x_squared generator (the image norm needs the function form).

    The convergence flag compares the value at the cutoff against the value at
    twice the cutoff (relative tolerance 1e-6); analytic generators extend the
    matrix for the comparison, plain matrices are flagged unconverged unless
    the doubled computation is possible.
    """
    if not B.is_symmetric:
        raise ValueError("coupling matrix must be symmetric")
    if kind not in ("L2", "H2_op", "H3_op"):
        raise ValueError(f"unknown norm kind {kind!r}")
    N = B.cutoff

    def value_at(M: int) -> float:
        if kind == "H3_op":
            if B.generator != "x_squared":
                raise ValueError("H3_op norm needs the x_squared generator")
            return _h3_operator_norm(M)
        entries = B.entries if M == N else _x2_matrix(M)
        return _l2_norm(entries) if kind == "L2" else _h2_weighted_norm(entries)

    value = value_at(N)
    if B.generator == "x_squared" or kind == "H3_op":
        doubled = value_at(2 * N)
        converged = abs(doubled - value) <= _CONVERGENCE_RTOL * max(abs(doubled), 1.0)
    else:
        converged = False
    return NormEstimate(value=value, kind=kind, cutoff_used=N, converged=converged)


class CouplingDecayBound(NamedTuple):
    value: float
    argmin_j: int
    violated: bool  # True when some scanned entry vanishes


def coupling_decay_constant(
    B: CouplingOperator, k: int, J_max: int = 200
) -> CouplingDecayBound:
    """Largest constant C with |B_{j,k}| >= C / j^3 over the scanned range.

    Returns min_{j <= J_max} j^3 |B_{j,k}| and the attaining j.  The scan uses
    the analytic generator past the cutoff when available, otherwise stops at
    the cutoff.  A vanishing entry means no such constant exists: the result
    is 0 with the violation flag set.
    """
    if not 1 <= k <= B.cutoff:
        raise ValueError(f"column {k} outside cutoff {B.cutoff}")
    if J_max < 1:
        raise ValueError("scan bound must be >= 1")
    top = J_max if B.generator == "x_squared" else min(J_max, B.cutoff)
    best, best_j = np.inf, 0
    for j in range(1, top + 1):
        v = j**3 * abs(B.entry(j, k))
        if v == 0.0:
            return CouplingDecayBound(0.0, j, True)
        if v < best:
            best, best_j = v, j
    return CouplingDecayBound(float(best), best_j, False)
