"""Constructive solver for finite trigonometric moment problems.

Given target values x_k for the integrals  x_k = ∫_0^T u(s) e^{i mu_k s} ds
against the transition frequencies mu_k = pi^2 (k^2 - l^2) of a base mode l,
build a real-valued control u as a finite combination of complex exponentials.
The construction inverts the Gram matrix of the exponential family on (0, T);
the family is a Riesz sequence for T > 2/pi (frequency spacing at least pi^2),
so the inversion carries explicit frame-bound certificates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .bounds import ingham_package, resonance_free
from .controls import ControlSignal, _eint, exponential_moment, exponential_sum_control

__all__ = [
    "FrequencySet",
    "BiorthogonalFamily",
    "MIN_HORIZON",
    "DEFAULT_HORIZON",
    "build_frequencies",
    "build_biorthogonal",
    "solve_moments",
    "frame_certificate",
]

PI = np.pi

# The exponential frequencies are spaced by integer multiples of pi^2, so a
# time horizon above 2*pi/pi^2 guarantees the Riesz-sequence inequalities
# uniformly in the truncation.
MIN_HORIZON = 2.0 / PI
DEFAULT_HORIZON = 4.0 / PI

GRAM_CONDITION_LIMIT = 1e12
MOMENT_MATCH_TOL = 1e-8


def _colliding_pair(l: int) -> Tuple[int, int]:
    """Smallest (m, k), m < k, with m^2 + k^2 = 2 l^2 and m, k != l."""
    target = 2 * l * l
    for m in range(1, l):
        rest = target - m * m
        k = int(np.sqrt(rest) + 0.5)
        if k * k == rest and k != l:
            return m, k
    raise AssertionError("no collision found for a degenerate base mode")


@dataclass(frozen=True)
class FrequencySet:
    """Signed, symmetrized exponential frequencies for base mode l.

    ``mu`` holds the physical transition frequencies pi^2 (k^2 - l^2) for
    k = 1..cutoff.  ``omega`` holds the frequencies of the exponential family
    actually used for the control: omega_k = -mu_k for positive labels and
    omega_{-k} = +mu_k for negative ones, over the signed labels
    {-cutoff..cutoff} minus {0, -l}; the zero frequency (label l) enters once.
    ``gap`` is the minimal pairwise distance, computed exactly on the integer
    multipliers before scaling by pi^2.
    """

    base_mode: int
    cutoff: int
    mu: Tuple[float, ...]
    labels: Tuple[int, ...]
    omega: Tuple[float, ...]
    gap: float

    def __post_init__(self):
        if len(self.labels) != 2 * self.cutoff - 1:
            raise ValueError("label set must have size 2*cutoff - 1")
        if len(self.labels) != len(self.omega):
            raise ValueError("labels and frequencies must align")


def build_frequencies(l: int, N: int) -> FrequencySet:
    """Frequency data for base mode l truncated at N modes.

    Raises if the base mode is degenerate, i.e. some other pair of modes
    shares the transition frequency: m^2 + k^2 = 2 l^2 makes the signed
    frequencies collide and no biorthogonal family exists.
    """
    if l < 1 or N < 1:
        raise ValueError("mode indices must be positive")
    if l > N:
        raise ValueError("base mode must lie inside the truncation")
    if not resonance_free(l):
        m, k = _colliding_pair(l)
        raise ValueError(
            f"base mode {l} is degenerate: exponential frequencies at signed "
            f"labels {k} and {-m} coincide ({m}^2 + {k}^2 = 2*{l}^2)"
        )
    # integer multipliers of pi^2, exact arithmetic
    mu_int = [k * k - l * l for k in range(1, N + 1)]
    labels = []
    omega_int = []
    for k in range(1, N + 1):
        labels.append(k)
        omega_int.append(-mu_int[k - 1])
    for k in range(1, N + 1):
        if k == l:
            continue
        labels.append(-k)
        omega_int.append(mu_int[k - 1])
    if len(set(omega_int)) != len(omega_int):
        seen = {}
        for lab, w in zip(labels, omega_int):
            if w in seen:
                raise ValueError(
                    f"duplicate frequency for labels {seen[w]} and {lab}"
                )
            seen[w] = lab
    diffs = np.diff(np.sort(np.asarray(omega_int, dtype=np.int64)))
    gap = float(diffs.min()) * PI**2 if diffs.size else float("inf")
    return FrequencySet(
        base_mode=l,
        cutoff=N,
        mu=tuple(float(v) * PI**2 for v in mu_int),
        labels=tuple(labels),
        omega=tuple(float(v) * PI**2 for v in omega_int),
        gap=gap,
    )


@dataclass(frozen=True)
class BiorthogonalFamily:
    """Dual family to the exponentials e^{i omega_m t} on (0, T).

    Row k of ``coefficients`` expands the dual function v_k in the exponential
    basis: v_k(t) = sum_m coefficients[k, m] e^{i omega_m t}, normalized so
    that <v_k, e^{i omega_m .}> = delta_km in L^2(0, T).
    """

    frequencies: FrequencySet
    T_horizon: float
    coefficients: np.ndarray
    gram_min: float
    gram_max: float
    gram_condition: float


def _gram_matrix(omega: np.ndarray, T: float) -> np.ndarray:
    n = len(omega)
    G = np.empty((n, n), dtype=complex)
    for p in range(n):
        for q in range(n):
            G[p, q] = _eint(omega[q] - omega[p], T)
    return G


def build_biorthogonal(freq: FrequencySet, T: float) -> BiorthogonalFamily:
    """Invert the exponential Gram matrix on (0, T) to get the dual family.

    The horizon check uses the truncation-uniform spacing pi^2 (threshold
    2/pi), not the per-set gap: this keeps the frame certificates valid for
    every truncation at once.
    """
    if T <= MIN_HORIZON:
        raise ValueError(
            f"time horizon {T} too short: the exponential family is only a "
            f"Riesz sequence for T > 2/pi ~ {MIN_HORIZON:.6f}"
        )
    omega = np.asarray(freq.omega)
    G = _gram_matrix(omega, T)
    eigs = np.linalg.eigvalsh(G)
    gram_min, gram_max = float(eigs[0]), float(eigs[-1])
    cond = gram_max / gram_min if gram_min > 0 else np.inf
    if cond > GRAM_CONDITION_LIMIT:
        raise ArithmeticError(
            f"Gram matrix condition number {cond:.3e} exceeds "
            f"{GRAM_CONDITION_LIMIT:.0e}; horizon too close to critical"
        )
    coefficients = np.linalg.inv(G).T
    return BiorthogonalFamily(
        frequencies=freq,
        T_horizon=T,
        coefficients=coefficients,
        gram_min=gram_min,
        gram_max=gram_max,
        gram_condition=cond,
    )


def frame_certificate(fam: BiorthogonalFamily) -> Tuple[float, float]:
    """Extreme Gram eigenvalues, checked against the universal frame bounds.

    At the reference horizon 4/pi with frequency spacing >= pi^2 the Gram
    spectrum must lie in [3 pi/16, 8/pi]; a violation means the family was
    built outside its validity regime and is reported as an error.
    """
    ing = ingham_package()
    if (
        abs(fam.T_horizon - DEFAULT_HORIZON) < 1e-12
        and fam.frequencies.gap >= PI**2 - 1e-9
    ):
        if fam.gram_min < ing.c1_sq - 1e-8 or fam.gram_max > ing.c2_sq + 1e-8:
            raise ArithmeticError(
                f"Gram spectrum [{fam.gram_min:.6f}, {fam.gram_max:.6f}] "
                f"escapes the frame interval [{ing.c1_sq:.6f}, {ing.c2_sq:.6f}]"
            )
    return fam.gram_min, fam.gram_max


def solve_moments(
    fam: BiorthogonalFamily, targets: Sequence[complex]
) -> ControlSignal:
    """Real control whose exponential moments against mu_1..mu_N hit targets.

    The entry at the base mode (zero frequency) is the time integral of a real
    control and must itself be real.  The remaining targets are extended
    conjugate-symmetrically to the signed label set, which makes the resulting
    exponential combination real-valued.
    """
    freq = fam.frequencies
    N = freq.cutoff
    x = np.asarray(targets, dtype=complex)
    if x.shape != (N,):
        raise ValueError(f"expected {N} target moments, got shape {x.shape}")
    l = freq.base_mode
    if abs(x[l - 1].imag) > 1e-12:
        raise ValueError(
            f"target at the base mode must be real (it is the time integral "
            f"of a real control); got imaginary part {x[l - 1].imag:.3e}"
        )
    x_ext = np.empty(len(freq.labels), dtype=complex)
    for i, lab in enumerate(freq.labels):
        x_ext[i] = x[lab - 1] if lab > 0 else np.conj(x[-lab - 1])
    y = fam.coefficients.T @ x_ext
    u = exponential_sum_control(
        [(complex(y[i]), float(freq.omega[i])) for i in range(len(y))],
        fam.T_horizon,
    )
    achieved = np.array([exponential_moment(u, mu) for mu in freq.mu])
    worst = float(np.max(np.abs(achieved - x)))
    if worst > MOMENT_MATCH_TOL:
        raise ArithmeticError(
            f"constructed control misses the target moments by {worst:.3e}"
        )
    return u
