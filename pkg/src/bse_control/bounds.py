"""Explicit constants, thresholds, and error bounds for resonant mode transfer.

Everything here is pure scalar arithmetic over a small set of operator
constants: the driven matrix element |B_jk|, operator norms of the coupling in
L2 / order-2 / order-3 weighted spaces, the cubic-decay constant of the target
column, and the off-resonance amplification factor coming from nearby
transition frequencies.

Constants come in two modes:

* "scanned"   — computed from the coupling matrix itself (safe defaults);
* "tabulated" — fixed reference values quoted for the x^2 coupling in the
  published error-budget table.  The two disagree where that table contains
  arithmetic slips (most visibly a factor 2 in |B_12|); both are exposed and
  every report records which mode produced each number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np

from .spectral import CouplingOperator, coupling_decay_constant, operator_norm

__all__ = [
    "ConstantsSet",
    "BoundReport",
    "InghamConstants",
    "ContractionPackage",
    "L2TransferBound",
    "H4GrowthBound",
    "H3TransferBound",
    "TransferThreshold",
    "REFERENCE_H3_COEFFICIENT",
    "SIMULABLE_CAP",
    "constants_for",
    "resonance_free",
    "near_resonant_set",
    "approx_bound_L2",
    "averaging_remainder",
    "h4_growth",
    "approx_bound_H3",
    "exact_transfer_threshold",
    "ingham_package",
    "contraction_package",
    "bound_report",
]

PI = np.pi

# Reference scale of the published eighth-power transfer-error budget for the
# (2,1) pair: bound ~ 1e80/n.  Used by the case-study harness to reproduce the
# quoted n ~ 2.3e117 threshold by cross-multiplication against the target ball.
REFERENCE_H3_COEFFICIENT = 1e80

# Above this many driving periods a run is reported as a certificate only.
SIMULABLE_CAP = 1e6

# Published reference values for the x^2 coupling (mode "tabulated").
_TAB_NORM_L2 = 1.0
_TAB_NORM_H2 = 1.64
_TAB_NORM_H3 = 5.2
_TAB_COUPLING_12 = 8.0 / (9.0 * PI**2)  # quoted |B_12| (half the quadrature value)
_TAB_DECAY = {1: (2.0 * PI - 3.0) / (6.0 * PI**2), 2: 8.0 / (9.0 * PI**2)}


def resonance_free(k: int, search_bound: Optional[int] = None) -> bool:
    """True iff no pair m, l != k of positive integers satisfies m^2 + l^2 = 2k^2.

    Any solution has m, l < k*sqrt(2), so search_bound = 2k is exhaustive.
    """
    if k < 1:
        raise ValueError("mode index must be positive")
    bound = search_bound if search_bound is not None else 2 * k
    if bound < 2 * k:
        raise ValueError(f"search bound {bound} < 2k is not exhaustive")
    target = 2 * k * k
    for m in range(1, bound + 1):
        if m == k:
            continue
        rest = target - m * m
        if rest < 1:
            continue
        l = math.isqrt(rest)
        if l * l == rest and l != k:
            return False
    return True


def near_resonant_set(
    j: int, k: int, B: CouplingOperator
) -> Tuple[List[Tuple[int, int]], float]:
    """Transitions whose frequency falls near the driven one, and their
    amplification factor.

    Returns the unordered pairs (l, m), l < m, with one index in {j, k},
    0 < |l^2 - m^2| <= 1.5*|k^2 - j^2|, |l^2 - m^2| != |k^2 - j^2|, and a
    nonvanishing matrix element; the second value is
    max 1/|sin(pi |l^2-m^2| / |k^2-j^2|)| over the set (0 when empty).

    Diagonal pairs l = m are excluded: they would make the factor infinite
    through sin(0) while contributing no transition at all.
    """
    if j == k:
        raise ValueError("the driven pair needs two distinct modes")
    delta = abs(k**2 - j**2)
    limit = 1.5 * delta
    pairs = []
    for a in (j, k):
        m_top = math.isqrt(int(a**2 + limit)) + 1
        for m in range(1, m_top + 1):
            if m == a:
                continue
            gap = abs(a**2 - m**2)
            if not (0 < gap <= limit) or gap == delta:
                continue
            if B.entry(min(a, m), max(a, m)) == 0.0:
                continue
            pair = (min(a, m), max(a, m))
            if pair not in pairs:
                pairs.append(pair)
    cprime = 0.0
    for l, m in pairs:
        s = abs(math.sin(PI * abs(l**2 - m**2) / delta))
        if s == 0.0:
            raise ArithmeticError(
                f"pair ({l},{m}) is exactly resonant with the driven transition"
            )
        cprime = max(cprime, 1.0 / s)
    return sorted(pairs), cprime


@dataclass(frozen=True)
class ConstantsSet:
    """The scalar inputs every bound needs, for one driven pair (j, k)."""

    mode: str  # scanned | tabulated
    j: int
    k: int
    coupling: float  # |B_jk|
    norm_l2: float
    norm_h2: float
    norm_h3: float
    decay_k: float  # largest C with |B_mk| >= C/m^3 over the scan
    decay_argmin: int
    cprime: float
    near_resonant_pairs: Tuple[Tuple[int, int], ...]
    provenance: dict = field(default_factory=dict)

    @property
    def delta(self) -> int:
        return abs(self.k**2 - self.j**2)


def constants_for(
    B: CouplingOperator, j: int, k: int, mode: str = "scanned"
) -> ConstantsSet:
    if mode not in ("scanned", "tabulated"):
        raise ValueError(f"unknown constants mode {mode!r}")
    if j == k or j < 1 or k < 1:
        raise ValueError("need two distinct positive mode indices")
    if max(j, k) > B.cutoff:
        raise ValueError("pair outside the truncation")
    pairs, cprime = near_resonant_set(j, k, B)
    if mode == "scanned":
        dec = coupling_decay_constant(B, k)
        try:
            norm_h3 = operator_norm(B, "H3_op").value
        except ValueError:
            # the order-3 image norm needs a position-space generator; for a
            # bare coefficient matrix it is unavailable
            norm_h3 = float("nan")
        cset = ConstantsSet(
            mode=mode,
            j=j,
            k=k,
            coupling=abs(B.entry(j, k)),
            norm_l2=operator_norm(B, "L2").value,
            norm_h2=operator_norm(B, "H2_op").value,
            norm_h3=norm_h3,
            decay_k=dec.value,
            decay_argmin=dec.argmin_j,
            cprime=cprime,
            near_resonant_pairs=tuple(pairs),
            provenance={name: "scanned" for name in
                        ("coupling", "norm_l2", "norm_h2", "norm_h3", "decay_k",
                         "cprime")},
        )
        return cset
    if B.generator != "x_squared":
        raise ValueError("tabulated constants exist only for the x^2 coupling")
    if {j, k} != {1, 2}:
        raise ValueError("tabulated coupling value exists only for the pair {1,2}")
    prov = {name: "tabulated" for name in
            ("coupling", "norm_l2", "norm_h2", "norm_h3", "decay_k")}
    prov["cprime"] = "scanned"
    return ConstantsSet(
        mode=mode,
        j=j,
        k=k,
        coupling=_TAB_COUPLING_12,
        norm_l2=_TAB_NORM_L2,
        norm_h2=_TAB_NORM_H2,
        norm_h3=_TAB_NORM_H3,
        decay_k=_TAB_DECAY[k],
        decay_argmin=1,
        cprime=cprime,
        near_resonant_pairs=tuple(pairs),
        provenance=prov,
    )


def _as_constants(
    B: Union[CouplingOperator, ConstantsSet], j: int, k: int, mode: str = "scanned"
) -> ConstantsSet:
    if isinstance(B, ConstantsSet):
        if (B.j, B.k) != (j, k):
            raise ValueError("constants were built for a different pair")
        return B
    return constants_for(B, j, k, mode)


def transfer_time(c: ConstantsSet) -> float:
    """Full-transfer time pi/|B_kj| of the averaged two-level rotation."""
    return PI / c.coupling


def drive_period(c: ConstantsSet) -> float:
    return 2.0 * PI / (PI**2 * c.delta)


def drive_abs_integral(c: ConstantsSet) -> float:
    """Integral of |cos| over one driving period: 4/(pi^2 |k^2-j^2|)."""
    return 4.0 / (PI**2 * c.delta)


def inverse_coupling(c: ConstantsSet) -> float:
    return 2.0 / c.coupling


def averaging_remainder(c: ConstantsSet, n: int) -> float:
    """First-order averaging remainder (1 + 2K||B||)(1 + C')||B|| I / n."""
    K = inverse_coupling(c)
    I = drive_abs_integral(c)
    return (1.0 + 2.0 * K * c.norm_l2) * (1.0 + c.cprime) * c.norm_l2 * I / n


class L2TransferBound(NamedTuple):
    threshold: float  # smallest n the bound is stated for
    bound: float  # on the squared L2 distance at the best window time
    vacuous: bool  # bound >= 2 says nothing about unit vectors


def approx_bound_L2(
    B: Union[CouplingOperator, ConstantsSet], j: int, k: int, n: int
) -> L2TransferBound:
    """Squared-distance bound 9(1+C')||B||^2/(|B_jk| |k^2-j^2| n)."""
    c = _as_constants(B, j, k)
    if c.coupling == 0.0:
        raise ZeroDivisionError("driven matrix element vanishes for this pair")
    threshold = 3.0 * (1.0 + c.cprime) * c.norm_l2**2 / (c.coupling * c.delta)
    bound = 3.0 * threshold / n
    return L2TransferBound(threshold=threshold, bound=bound, vacuous=bound >= 2.0)


class H4GrowthBound(NamedTuple):
    bound: float
    bv_quarter_periods: float  # d: quarter periods of the drive in [0, nT*+T]
    control_bv_norm: float  # majorant of ||u||_BV + |u(0)| over the run
    resolvent_factor: float  # M: shifted-resolvent amplification
    damping_shift: float  # the spectral shift chosen to make M finite


def h4_growth(
    B: Union[CouplingOperator, ConstantsSet], j: int, k: int, n: int
) -> H4GrowthBound:
    """Growth bound on the order-4 weighted norm of the driven state."""
    c = _as_constants(B, j, k)
    b = c.coupling
    d = 2.0 * (n * PI**2 * c.delta + 2.0 * b) / b
    bv = 2.0 * (n * PI**2 * c.delta + 4.0 * b) / b
    lam_shift = c.norm_h2 * (bv + 1.0) / n
    M = (bv + 1.0) / bv
    expo = c.norm_h2 / b + 2.0 * c.norm_h2 / (n * PI * c.delta) + 1.0
    try:
        bound = math.exp(expo) * 2.0 * M**2 * (PI**2 + lam_shift) * j**4
    except OverflowError:  # weak coupling: the majorant leaves float range
        bound = float("inf")
    return H4GrowthBound(
        bound=bound,
        bv_quarter_periods=d,
        control_bv_norm=bv,
        resolvent_factor=M,
        damping_shift=lam_shift,
    )


class H3TransferBound(NamedTuple):
    bound: float  # on the EIGHTH power of the order-3 distance at time n T*
    coefficient: float  # the n-free prefactor; bound = coefficient / n
    window_drift_term: float  # n-free budget for moving from T_n to n T*
    interpolation_term: float  # n-free budget from the L2 x order-4 interpolation


def approx_bound_H3(
    B: Union[CouplingOperator, ConstantsSet], j: int, k: int, n: float
) -> H3TransferBound:
    """Eighth-power transfer-error budget at the nominal time n T*.

    Assembled as 2^7 * (window-drift term + interpolation term) / n with both
    terms evaluated at their large-n limits, which keeps the whole bound
    exactly linear in 1/n.
    """
    c = _as_constants(B, j, k)
    b = c.coupling
    try:
        drift = (
            2**5 * 3.0 * math.sqrt(2.0) * math.exp(c.norm_h2 / b)
            * c.norm_h3 * c.norm_h2 * j**4 / b
        )
        lam_inf = 2.0 * c.norm_h2 * PI**2 * c.delta / b
        h4_inf = math.exp(c.norm_h2 / b + 1.0) * 2.0 * (PI**2 + lam_inf) * j**4
        interp = (
            9.0 * (1.0 + c.cprime) * c.norm_l2**2 / (b * c.delta)
            * (h4_inf + k**4) ** 6
        )
        coefficient = 2**7 * (drift + interp)
    except OverflowError:  # weak coupling: the budget leaves float range
        drift = interp = coefficient = float("inf")
    return H3TransferBound(
        bound=coefficient / n,
        coefficient=coefficient,
        window_drift_term=drift,
        interpolation_term=interp,
    )


class TransferThreshold(NamedTuple):
    n_star: float  # repetition count above which exact transfer is certified
    radius: float  # target-ball radius 3 C_k^2/(16 k^3 ||B||_3^2)
    radius_weighted: float  # same with the (pi k)^3 mode-norm convention
    norm_aggregate: float  # ||B||_2^6 ||B|| ||B||_3^16 max(||B||, ||B||_3)
    pair_aggregate: float  # exp/decay/index factor of the pair
    simulable: bool  # n_star small enough to drive an actual simulation


def exact_transfer_threshold(
    B: Union[CouplingOperator, ConstantsSet], j: int, k: int
) -> TransferThreshold:
    c = _as_constants(B, j, k)
    if c.decay_k <= 0.0:
        raise ZeroDivisionError("cubic-decay constant vanishes for this column")
    if c.coupling == 0.0:
        raise ZeroDivisionError("driven matrix element vanishes for this pair")
    norm_aggregate = (
        c.norm_h2**6 * c.norm_l2 * c.norm_h3**16 * max(c.norm_l2, c.norm_h3)
    )
    # weakly coupled pairs push exp(6 ||B||_(2) / |B_jk|) past float range;
    # an infinite threshold is the honest value there (never simulable)
    try:
        pair_aggregate = (
            math.exp(6.0 * c.norm_h2 / c.coupling)
            * c.delta**5
            * k**24
            * max(j, k) ** 24
            * c.decay_k**-16
            * c.coupling**-7
        )
        n_star = 2.0**51 * PI**19 * norm_aggregate * (1.0 + c.cprime) * pair_aggregate
    except OverflowError:
        pair_aggregate = float("inf")
        n_star = float("inf")
    radius = 3.0 * c.decay_k**2 / (16.0 * k**3 * c.norm_h3**2)
    radius_weighted = 3.0 * c.decay_k**2 / (16.0 * (PI * k) ** 3 * c.norm_h3**2)
    return TransferThreshold(
        n_star=n_star,
        radius=radius,
        radius_weighted=radius_weighted,
        norm_aggregate=norm_aggregate,
        pair_aggregate=pair_aggregate,
        simulable=n_star <= SIMULABLE_CAP,
    )


class InghamConstants(NamedTuple):
    c1_sq: float  # lower frame bound of the exponential family, 3 pi/16
    c2_sq: float  # upper frame bound, 8/pi
    moments_from_state_norm: float  # gain of state -> moment map on (0, 4/pi)
    control_from_moments_norm: float  # gain of moments -> control, 2/sqrt(c1_sq)


def ingham_package() -> InghamConstants:
    c1_sq = 3.0 * PI / 16.0
    c2_sq = 8.0 / PI
    moment_gain = 3.0 * PI**-3 * max(math.sqrt(2.0 * c2_sq), math.sqrt(4.0 / PI))
    control_gain = 2.0 / math.sqrt(c1_sq)
    return InghamConstants(
        c1_sq=c1_sq,
        c2_sq=c2_sq,
        moments_from_state_norm=moment_gain,
        control_from_moments_norm=control_gain,
    )


class ContractionPackage(NamedTuple):
    linear_gain: float  # a_l = 2 C Ctilde l^3 / C_l
    contraction_scale: float  # mu = (22/5) l^3 / C_l
    linearization_lower_bound: float  # (M - M_1) >= C_l/(2 Ctilde) >= 3 C_l/16
    control_ball_radius: float  # C_l / (l^3 ||B||_3^2)
    state_ball_radius: float  # 3 C_l^2 / (16 l^3 ||B||_3^2)


def contraction_package(
    l: int,
    B: Union[CouplingOperator, ConstantsSet, None] = None,
    *,
    decay_constant: Optional[float] = None,
    norm_h3: Optional[float] = None,
    mode: str = "scanned",
) -> ContractionPackage:
    """Quantitative inverse-function data for exact steering around mode l.

    Constants default to scanned values from B; decay_constant / norm_h3
    override them (e.g. with tabulated reference numbers).
    """
    if not resonance_free(l):
        raise ValueError(f"mode {l} fails the non-resonance condition")
    if decay_constant is None or norm_h3 is None:
        if isinstance(B, ConstantsSet):
            if decay_constant is None:
                decay_constant = B.decay_k
            if norm_h3 is None:
                norm_h3 = B.norm_h3
        elif isinstance(B, CouplingOperator):
            if decay_constant is None:
                if mode == "tabulated":
                    if l not in _TAB_DECAY:
                        raise ValueError(f"no tabulated decay constant for column {l}")
                    decay_constant = _TAB_DECAY[l]
                else:
                    decay_constant = coupling_decay_constant(B, l).value
            if norm_h3 is None:
                norm_h3 = (
                    _TAB_NORM_H3 if mode == "tabulated"
                    else operator_norm(B, "H3_op").value
                )
        else:
            raise ValueError("need a coupling operator or explicit constants")
    if decay_constant <= 0.0:
        raise ZeroDivisionError("cubic-decay constant must be positive")
    ing = ingham_package()
    C, Ct = ing.moments_from_state_norm, ing.control_from_moments_norm
    l3 = float(l**3)
    return ContractionPackage(
        linear_gain=2.0 * C * Ct * l3 / decay_constant,
        contraction_scale=(22.0 / 5.0) * l3 / decay_constant,
        linearization_lower_bound=decay_constant / (2.0 * Ct),
        control_ball_radius=decay_constant / (l3 * norm_h3**2),
        state_ball_radius=3.0 * decay_constant**2 / (16.0 * l3 * norm_h3**2),
    )


@dataclass(frozen=True)
class BoundReport:
    """Every constant and bound for one driven pair at one driving strength."""

    j: int
    k: int
    n: int
    mode: str
    # driven-pair constants
    coupling: float
    norm_l2: float
    norm_h2: float
    norm_h3: float
    decay_k: float
    decay_argmin: int
    resonance_free_k: bool
    # drive geometry
    transfer_time: float
    drive_period: float
    drive_abs_integral: float
    inverse_coupling: float
    offres_amplification: float
    near_resonant_pairs: Tuple[Tuple[int, int], ...]
    # approximate-transfer bounds
    averaging_remainder: float
    l2_threshold: float
    l2_error_bound: float
    l2_bound_vacuous: bool
    h4_growth_bound: float
    bv_quarter_periods: float
    control_bv_norm: float
    resolvent_factor: float
    damping_shift: float
    h3_error_bound_pow8: float
    h3_coefficient: float
    # full-transfer certificate
    norm_aggregate: float
    pair_aggregate: float
    n_threshold: float
    simulable: bool
    # moment-problem constants
    ingham_c1_sq: float
    ingham_c2_sq: float
    moments_from_state_norm: float
    control_from_moments_norm: float
    # corrector ball around the target mode (l = k)
    linear_gain: float
    contraction_scale: float
    linearization_lower_bound: float
    control_ball_radius: float
    state_ball_radius: float
    state_ball_radius_weighted: float
    provenance: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if isinstance(v, tuple):
                v = [list(p) if isinstance(p, tuple) else p for p in v]
            elif isinstance(v, (np.floating, np.integer)):
                v = v.item()
            d[name] = v
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def bound_report(
    B: CouplingOperator, j: int, k: int, n: int, mode: str = "scanned"
) -> BoundReport:
    if n < 1:
        raise ValueError("driving-strength divisor n must be >= 1")
    if not resonance_free(k):
        raise ValueError(f"mode {k} fails the non-resonance condition")
    c = constants_for(B, j, k, mode)
    l2b = approx_bound_L2(c, j, k, n)
    h4 = h4_growth(c, j, k, n)
    h3 = approx_bound_H3(c, j, k, n)
    thr = exact_transfer_threshold(c, j, k)
    ing = ingham_package()
    contr = contraction_package(
        k, c, decay_constant=c.decay_k, norm_h3=c.norm_h3
    )
    return BoundReport(
        j=j,
        k=k,
        n=n,
        mode=mode,
        coupling=c.coupling,
        norm_l2=c.norm_l2,
        norm_h2=c.norm_h2,
        norm_h3=c.norm_h3,
        decay_k=c.decay_k,
        decay_argmin=c.decay_argmin,
        resonance_free_k=resonance_free(k),
        transfer_time=transfer_time(c),
        drive_period=drive_period(c),
        drive_abs_integral=drive_abs_integral(c),
        inverse_coupling=inverse_coupling(c),
        offres_amplification=c.cprime,
        near_resonant_pairs=c.near_resonant_pairs,
        averaging_remainder=averaging_remainder(c, n),
        l2_threshold=l2b.threshold,
        l2_error_bound=l2b.bound,
        l2_bound_vacuous=l2b.vacuous,
        h4_growth_bound=h4.bound,
        bv_quarter_periods=h4.bv_quarter_periods,
        control_bv_norm=h4.control_bv_norm,
        resolvent_factor=h4.resolvent_factor,
        damping_shift=h4.damping_shift,
        h3_error_bound_pow8=h3.bound,
        h3_coefficient=h3.coefficient,
        norm_aggregate=thr.norm_aggregate,
        pair_aggregate=thr.pair_aggregate,
        n_threshold=thr.n_star,
        simulable=thr.simulable,
        ingham_c1_sq=ing.c1_sq,
        ingham_c2_sq=ing.c2_sq,
        moments_from_state_norm=ing.moments_from_state_norm,
        control_from_moments_norm=ing.control_from_moments_norm,
        linear_gain=contr.linear_gain,
        contraction_scale=contr.contraction_scale,
        linearization_lower_bound=contr.linearization_lower_bound,
        control_ball_radius=contr.control_ball_radius,
        state_ball_radius=thr.radius,
        state_ball_radius_weighted=thr.radius_weighted,
        provenance=dict(c.provenance),
    )
