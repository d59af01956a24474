"""Inner integration loops.

Two schemes over the truncated bilinear dynamics i c' = (Lambda + u(t) B) c:

* exp_midpoint — exponential midpoint rule in the interaction picture.  Each
  step applies exp(-i u(t_mid) dt B) conjugated by free-evolution phases; the
  update is a product of unitaries, so norm drift stays at rounding level over
  tens of millions of steps.
* rk_adaptive — embedded Dormand-Prince 5(4) on the raw equation with
  per-step error control.  Used as an independent cross-check; it resolves
  the fast phases directly, so it is the slower scheme.

Both are compiled with numba when available; plain numpy fallbacks keep the
package importable (and the test suite meaningful) without a JIT.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly by which path runs
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# control forms encoded for the kernels
FORM_ZERO = 0
FORM_COSINE = 1
FORM_SUM = 2


@njit(cache=True)
def _u_at(t, form, amp, freq, yre, yim, om):
    if form == FORM_ZERO:
        return 0.0
    if form == FORM_COSINE:
        return amp * np.cos(freq * t)
    s = 0.0
    for p in range(om.size):
        s += yre[p] * np.cos(om[p] * t) - yim[p] * np.sin(om[p] * t)
    return s


@njit(cache=True)
def midpoint_kernel(
    a, V, Vt, beta, lam, t0, dt, n_steps, form, amp, freq, yre, yim, om, rec_steps, out
):
    """Advance interaction-picture coefficients a by n_steps of size dt.

    B = V diag(beta) V^T is the eigendecomposition of the coupling matrix.
    Snapshots of a (still interaction picture) are written to out at the step
    counts listed in rec_steps (sorted, 1-based).  Every factor of the scheme
    is unitary, so the norm is pinned back to 1 after each step; the returned
    drift is the largest single-step deviation seen before renormalizing,
    which stays at roundoff scale however long the run is.
    """
    N = a.size
    w = np.empty(N, dtype=np.complex128)
    drift = 0.0
    ri = 0
    for step in range(n_steps):
        tm = t0 + (step + 0.5) * dt
        u = _u_at(tm, form, amp, freq, yre, yim, om)
        if u != 0.0:
            for i in range(N):
                w[i] = np.exp(-1j * lam[i] * tm) * a[i]
            y = np.dot(Vt, w)
            for i in range(N):
                y[i] *= np.exp(-1j * u * dt * beta[i])
            w2 = np.dot(V, y)
            for i in range(N):
                a[i] = np.exp(1j * lam[i] * tm) * w2[i]
            nrm = 0.0
            for i in range(N):
                nrm += a[i].real * a[i].real + a[i].imag * a[i].imag
            nrm = np.sqrt(nrm)
            d = abs(nrm - 1.0)
            if d > drift:
                drift = d
            inv = 1.0 / nrm
            for i in range(N):
                a[i] *= inv
        while ri < rec_steps.size and rec_steps[ri] == step + 1:
            for i in range(N):
                out[ri, i] = a[i]
            ri += 1
    return drift


def midpoint_kernel_numpy(
    a, V, Vt, beta, lam, t0, dt, n_steps, form, amp, freq, yre, yim, om, rec_steps, out
):
    drift = 0.0
    ri = 0
    for step in range(n_steps):
        tm = t0 + (step + 0.5) * dt
        if form == FORM_ZERO:
            u = 0.0
        elif form == FORM_COSINE:
            u = amp * np.cos(freq * tm)
        else:
            u = float(np.sum(yre * np.cos(om * tm) - yim * np.sin(om * tm)))
        if u != 0.0:
            ph = np.exp(-1j * lam * tm)
            y = Vt @ (ph * a)
            y *= np.exp(-1j * u * dt * beta)
            a[:] = np.conj(ph) * (V @ y)
            nrm = np.linalg.norm(a)
            d = abs(nrm - 1.0)
            if d > drift:
                drift = d
            a /= nrm
        while ri < rec_steps.size and rec_steps[ri] == step + 1:
            out[ri] = a
            ri += 1
    return drift


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
        [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    ]
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [
        5179 / 57600,
        0.0,
        7571 / 16695,
        393 / 640,
        -92097 / 339200,
        187 / 2100,
        1 / 40,
    ]
)


@njit(cache=True)
def _rhs(t, c, Bc, lam, form, amp, freq, yre, yim, om):
    """i c' = (Lambda + u B) c  =>  c' = -i (lam*c + u * B c)."""
    N = c.size
    u = _u_at(t, form, amp, freq, yre, yim, om)
    out = np.empty(N, dtype=np.complex128)
    if u == 0.0:
        for i in range(N):
            out[i] = -1j * lam[i] * c[i]
        return out
    bc = np.dot(Bc, c)
    for i in range(N):
        out[i] = -1j * (lam[i] * c[i] + u * bc[i])
    return out


@njit(cache=True)
def dp45_kernel(c, Bc, lam, t0, t1, tol, form, amp, freq, yre, yim, om):
    """Adaptive Dormand-Prince 5(4) from t0 to t1; returns (c_final, drift, n_acc, n_rej)."""
    N = c.size
    t = t0
    lam_max = lam[N - 1]
    h = min(0.1, 0.5 / lam_max, t1 - t0)
    k = np.zeros((7, N), dtype=np.complex128)
    drift = 0.0
    n_acc = 0
    n_rej = 0
    safety = 0.9
    while t < t1 - 1e-15:
        if t + h > t1:
            h = t1 - t
        k[0] = _rhs(t, c, Bc, lam, form, amp, freq, yre, yim, om)
        for s in range(1, 6):
            y = c.copy()
            for q in range(s):
                aq = _DP_A[s, q]
                if aq != 0.0:
                    for i in range(N):
                        y[i] += h * aq * k[q, i]
            k[s] = _rhs(t + _DP_C[s] * h, y, Bc, lam, form, amp, freq, yre, yim, om)
        c5 = c.copy()
        for s in range(6):
            bs = _DP_B5[s]
            if bs != 0.0:
                for i in range(N):
                    c5[i] += h * bs * k[s, i]
        k[6] = _rhs(t + h, c5, Bc, lam, form, amp, freq, yre, yim, om)
        errn = 0.0
        for i in range(N):
            e = 0.0 + 0.0j
            for s in range(7):
                db = _DP_B5[s] - _DP_B4[s]
                if db != 0.0:
                    e += db * k[s, i]
            ei = h * abs(e)
            sc = tol * (1.0 + max(abs(c[i]), abs(c5[i])))
            r = ei / sc
            if r > errn:
                errn = r
        if errn <= 1.0:
            t += h
            c = c5
            n_acc += 1
            nrm = 0.0
            for i in range(N):
                nrm += c[i].real * c[i].real + c[i].imag * c[i].imag
            d = abs(np.sqrt(nrm) - 1.0)
            if d > drift:
                drift = d
        else:
            n_rej += 1
        fac = safety * errn ** (-0.2) if errn > 0.0 else 5.0
        if fac > 5.0:
            fac = 5.0
        if fac < 0.2:
            fac = 0.2
        h = h * fac
        if h < 1e-14:
            break
    return c, drift, n_acc, n_rej


def dp45_kernel_numpy(c, Bc, lam, t0, t1, tol, form, amp, freq, yre, yim, om):
    def rhs(t, c):
        if form == FORM_ZERO:
            u = 0.0
        elif form == FORM_COSINE:
            u = amp * np.cos(freq * t)
        else:
            u = float(np.sum(yre * np.cos(om * t) - yim * np.sin(om * t)))
        if u == 0.0:
            return -1j * lam * c
        return -1j * (lam * c + u * (Bc @ c))

    t = t0
    h = min(0.1, 0.5 / lam[-1], t1 - t0)
    drift, n_acc, n_rej = 0.0, 0, 0
    k = np.zeros((7, c.size), dtype=complex)
    while t < t1 - 1e-15:
        if t + h > t1:
            h = t1 - t
        k[0] = rhs(t, c)
        for s in range(1, 6):
            y = c + h * (_DP_A[s, :s] @ k[:s])
            k[s] = rhs(t + _DP_C[s] * h, y)
        c5 = c + h * (_DP_B5[:6] @ k[:6])
        k[6] = rhs(t + h, c5)
        e = h * np.abs((_DP_B5 - _DP_B4) @ k)
        sc = tol * (1.0 + np.maximum(np.abs(c), np.abs(c5)))
        errn = float(np.max(e / sc))
        if errn <= 1.0:
            t += h
            c = c5
            n_acc += 1
            drift = max(drift, abs(np.linalg.norm(c) - 1.0))
        else:
            n_rej += 1
        fac = min(5.0, max(0.2, 0.9 * errn**-0.2)) if errn > 0 else 5.0
        h *= fac
        if h < 1e-14:
            break
    return c, drift, n_acc, n_rej
