"""Control signals on a finite time interval: the scaled resonant cosine used
for slow mode transfer, finite sums of complex exponentials produced by the
moment solver, and the zero control.  All integrals (L2 norm, exponential
moments) have closed forms; nothing here requires quadrature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

__all__ = [
    "ControlSignal",
    "zero_control",
    "periodic_transfer_control",
    "exponential_sum_control",
    "evaluate",
    "l2_norm",
    "exponential_moment",
    "time_reflected",
    "add",
    "scale",
    "realness_defect",
]

FORMS = ("periodic_cosine", "biorthogonal_sum", "zero")


@dataclass(frozen=True)
class ControlSignal:
    """Real-valued control supported on [0, duration].

    periodic_cosine: u(t) = amplitude * cos(frequency * t).
    biorthogonal_sum: u(t) = sum_p Re(y_p * e^{i omega_p t}) with terms
    (y_p, omega_p); realness requires conjugate symmetry of the terms.
    zero: u = 0.
    """

    form: str
    duration: float
    amplitude: float = 0.0
    frequency: float = 0.0
    terms: Tuple[Tuple[complex, float], ...] = ()

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown control form {self.form!r}")
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")
        object.__setattr__(
            self,
            "terms",
            tuple((complex(y), float(w)) for y, w in self.terms),
        )

    def __call__(self, t):
        return evaluate(self, t)

    def to_json_dict(self) -> dict:
        d = {"form": self.form, "T": float(self.duration)}
        if self.form == "periodic_cosine":
            d["amplitude"] = float(self.amplitude)
            d["frequency"] = float(self.frequency)
        elif self.form == "biorthogonal_sum":
            d["terms"] = [
                [float(y.real), float(y.imag), float(w)] for y, w in self.terms
            ]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json_dict(d: dict) -> "ControlSignal":
        form = d["form"]
        if form == "periodic_cosine":
            return ControlSignal(
                form=form,
                duration=d["T"],
                amplitude=d["amplitude"],
                frequency=d["frequency"],
            )
        if form == "biorthogonal_sum":
            terms = tuple((complex(re, im), w) for re, im, w in d["terms"])
            return ControlSignal(form=form, duration=d["T"], terms=terms)
        return ControlSignal(form="zero", duration=d["T"])


def zero_control(duration: float) -> ControlSignal:
    return ControlSignal(form="zero", duration=duration)


def periodic_transfer_control(j: int, k: int, n: int, duration: float) -> ControlSignal:
    """Resonant cosine drive for the j <-> k transition at amplitude 1/n.

    u(t) = cos(pi^2 |k^2 - j^2| t)/n; driving at the transition frequency with
    small amplitude makes the averaged dynamics rotate population between the
    two modes at rate |B_jk|/(2n).
    """
    if j == k:
        raise ValueError("transfer needs two distinct modes")
    if n < 1:
        raise ValueError("amplitude divisor n must be >= 1")
    return ControlSignal(
        form="periodic_cosine",
        duration=duration,
        amplitude=1.0 / n,
        frequency=np.pi**2 * abs(k**2 - j**2),
    )


def exponential_sum_control(
    terms: Sequence[Tuple[complex, float]], duration: float
) -> ControlSignal:
    return ControlSignal(form="biorthogonal_sum", duration=duration, terms=tuple(terms))


def evaluate(u: ControlSignal, t):
    """u(t); accepts scalars or arrays."""
    t = np.asarray(t, dtype=float)
    if u.form == "zero":
        out = np.zeros_like(t)
    elif u.form == "periodic_cosine":
        out = u.amplitude * np.cos(u.frequency * t)
    else:
        out = np.zeros_like(t)
        for y, w in u.terms:
            out = out + y.real * np.cos(w * t) - y.imag * np.sin(w * t)
    return out if out.ndim else float(out)


def _complex_sum(u: ControlSignal, t: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(t, dtype=complex)
    for y, w in u.terms:
        acc = acc + y * np.exp(1j * w * t)
    return acc


def realness_defect(u: ControlSignal, num: int = 1000) -> float:
    """max |Im sum_p y_p e^{i omega_p t}| over a sample grid (0 for other forms)."""
    if u.form != "biorthogonal_sum":
        return 0.0
    t = np.linspace(0.0, u.duration, num)
    return float(np.max(np.abs(_complex_sum(u, t).imag)))


def _eint(delta: float, T: float) -> complex:
    """int_0^T e^{i delta t} dt = (e^{i delta T} - 1)/(i delta), stable near 0."""
    z = delta * T
    if abs(z) < 1e-8:
        return T * (1.0 + 1j * z / 2.0 - z**2 / 6.0)
    return (np.exp(1j * z) - 1.0) / (1j * delta)


def exponential_moment(u: ControlSignal, mu: float) -> complex:
    """Closed form of int_0^T u(t) e^{i mu t} dt."""
    T = u.duration
    if u.form == "zero":
        return 0.0 + 0.0j
    if u.form == "periodic_cosine":
        # cos(w t) = (e^{iwt} + e^{-iwt})/2
        a, w = u.amplitude, u.frequency
        return 0.5 * a * (_eint(mu + w, T) + _eint(mu - w, T))
    acc = 0.0 + 0.0j
    for y, w in u.terms:
        # the real part of y e^{iwt} splits into (y/2)e^{iwt} + (conj(y)/2)e^{-iwt}
        acc += 0.5 * y * _eint(mu + w, T) + 0.5 * np.conj(y) * _eint(mu - w, T)
    return acc


def l2_norm(u: ControlSignal) -> float:
    """||u||_{L2(0,T)} in closed form."""
    T = u.duration
    if u.form == "zero":
        return 0.0
    if u.form == "periodic_cosine":
        a, w = u.amplitude, u.frequency
        if w == 0.0:
            return abs(a) * math.sqrt(T)
        return abs(a) * math.sqrt(T / 2.0 + math.sin(2.0 * w * T) / (4.0 * w))
    acc = 0.0
    for yp, wp in u.terms:
        for yq, wq in u.terms:
            acc += (yp * np.conj(yq) * _eint(wp - wq, T)).real
    return math.sqrt(max(acc, 0.0))


def time_reflected(u: ControlSignal) -> ControlSignal:
    """The control t -> u(T - t) on the same interval (drives the reversed run)."""
    T = u.duration
    if u.form == "zero":
        return u
    if u.form == "periodic_cosine":
        # a cos(w(T-t)) = Re(a e^{iwT} e^{-iwt}); emit the conjugate-symmetric pair
        a, w = u.amplitude, u.frequency
        half = 0.5 * a
        terms = (
            (half * np.exp(1j * w * T), -w),
            (half * np.exp(-1j * w * T), w),
        )
        return ControlSignal(form="biorthogonal_sum", duration=T, terms=terms)
    terms = tuple((y * np.exp(1j * w * T), -w) for y, w in u.terms)
    return ControlSignal(form="biorthogonal_sum", duration=T, terms=terms)


def _as_terms(u: ControlSignal):
    if u.form == "zero":
        return ()
    if u.form == "biorthogonal_sum":
        return u.terms
    a, w = u.amplitude, u.frequency
    return ((0.5 * a + 0.0j, w), (0.5 * a + 0.0j, -w))


def add(u: ControlSignal, v: ControlSignal) -> ControlSignal:
    """Pointwise sum on a common support (terms merged by frequency)."""
    if abs(u.duration - v.duration) > 1e-12 * max(u.duration, v.duration, 1.0):
        raise ValueError("cannot add controls with different supports")
    if u.form == "zero":
        return v
    if v.form == "zero":
        return u
    merged: dict = {}
    for y, w in _as_terms(u) + _as_terms(v):
        merged[w] = merged.get(w, 0.0 + 0.0j) + y
    terms = tuple(sorted(merged.items(), key=lambda t: t[0]))
    terms = tuple((y, w) for w, y in terms)
    return ControlSignal(form="biorthogonal_sum", duration=u.duration, terms=terms)


def scale(u: ControlSignal, alpha: float) -> ControlSignal:
    if u.form == "zero":
        return u
    if u.form == "periodic_cosine":
        return ControlSignal(
            form="periodic_cosine",
            duration=u.duration,
            amplitude=alpha * u.amplitude,
            frequency=u.frequency,
        )
    return ControlSignal(
        form="biorthogonal_sum",
        duration=u.duration,
        terms=tuple((alpha * y, w) for y, w in u.terms),
    )
