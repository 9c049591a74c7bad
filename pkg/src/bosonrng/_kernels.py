"""Jitted hot-path kernels.

Exact operation-for-operation mirrors of the pure-Python reference in
``streams`` (Philox-4x64-10, uniform and normal mappings) plus the urn scan
loops. The probability arithmetic here must stay identical to
``urn.step_probability_blue``; do not reorder or refactor the float
expressions. Parallel kernels write only to per-run slots, so results are
independent of thread count and schedule.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

# Avoid the TBB version probe; workqueue is always available and fork-safe.
numba.config.THREADING_LAYER = "workqueue"

_U64 = np.uint64
_M0 = _U64(0xD2E7470EE14C6C93)
_M1 = _U64(0xCA5A826395121157)
_W0 = _U64(0x9E3779B97F4A7C15)
_W1 = _U64(0xBB67AE8584CAA73B)
_MASK32 = _U64(0xFFFFFFFF)
_SH32 = _U64(32)
_SH11 = _U64(11)
_SH12 = _U64(12)
_ZERO = _U64(0)
_ONE = _U64(1)
_INV53 = 1.0 / 9007199254740992.0
_CHANNEL_SHIFT = _U64(56)
_CH_URN = _U64(0)
_CH_DETECTOR = _U64(1)
_CH_SOURCE = _U64(2)


@njit(nogil=True, cache=True, inline="always")
def _mulhi(a, b):
    ah = a >> _SH32
    al = a & _MASK32
    bh = b >> _SH32
    bl = b & _MASK32
    t = ah * bl + ((al * bl) >> _SH32)
    y = al * bh + (t & _MASK32)
    return ah * bh + (t >> _SH32) + (y >> _SH32)


@njit(nogil=True, cache=True, inline="always")
def _philox4(ctr, k0, k1):
    c0 = ctr
    c1 = _ZERO
    c2 = _ZERO
    c3 = _ZERO
    for _ in range(10):
        hi0 = _mulhi(c0, _M0)
        lo0 = c0 * _M0
        hi1 = _mulhi(c2, _M1)
        lo1 = c2 * _M1
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return c0, c1, c2, c3


@njit(nogil=True, cache=True, inline="always")
def _u53(raw):
    return (raw >> _SH11) * _INV53


@njit(nogil=True, cache=True, inline="always")
def _u_open(raw):
    # odd numerator over 2^53: exact, strictly inside (0, 1)
    return ((raw >> _SH12) * _U64(2) + _ONE) * _INV53


@njit(nogil=True, cache=True)
def _norm_ppf(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    x = num / den
    if q < 0.0:
        return -x
    return x


@njit(nogil=True, cache=True)
def urn_final_blue(key0, key1, b0, r0, steps):
    """Scan `steps` urn transitions; returns the final blue count (int64)."""
    b = b0
    r = r0
    ctr = _ZERO
    i = np.int64(0)
    while i < steps:
        ctr += _ONE
        o0, o1, o2, o3 = _philox4(ctr, key0, key1)
        n = steps - i
        if _u53(o0) < (b + 1.0) / (b + r + 2.0):
            b += 1
        else:
            r += 1
        if n > 1:
            if _u53(o1) < (b + 1.0) / (b + r + 2.0):
                b += 1
            else:
                r += 1
        if n > 2:
            if _u53(o2) < (b + 1.0) / (b + r + 2.0):
                b += 1
            else:
                r += 1
        if n > 3:
            if _u53(o3) < (b + 1.0) / (b + r + 2.0):
                b += 1
            else:
                r += 1
        i += 4 if n >= 4 else n
    return b


@njit(nogil=True, cache=True)
def urn_trajectory(key0, key1, b0, r0, steps, stride, out):
    """Scan with fraction recording at each stride (and the final step).

    ``out`` must have ceil(steps / stride) slots. Returns final blue count.
    """
    b = b0
    r = r0
    ctr = _ZERO
    pos = 4
    o0 = _ZERO
    o1 = _ZERO
    o2 = _ZERO
    o3 = _ZERO
    idx = 0
    for i in range(np.int64(1), steps + 1):
        if pos == 4:
            ctr += _ONE
            o0, o1, o2, o3 = _philox4(ctr, key0, key1)
            pos = 0
        if pos == 0:
            raw = o0
        elif pos == 1:
            raw = o1
        elif pos == 2:
            raw = o2
        else:
            raw = o3
        pos += 1
        if _u53(raw) < (b + 1.0) / (b + r + 2.0):
            b += 1
        else:
            r += 1
        if i % stride == 0 or i == steps:
            if idx < out.shape[0]:
                out[idx] = b / (b + r)
                idx += 1
    return b


@njit(nogil=True, parallel=True, cache=True)
def ensemble_limits(key0, run_base, b0s, r0s, steps, out_t):
    """Limiting value b/(b+r) for a batch of runs, one derived stream each."""
    count = out_t.shape[0]
    for i in prange(count):
        key1 = (_CH_URN << _CHANNEL_SHIFT) | _U64(run_base + i)
        b = urn_final_blue(key0, key1, b0s[i], r0s[i], steps)
        out_t[i] = b / (b0s[i] + r0s[i] + steps)


@njit(nogil=True, parallel=True, cache=True)
def source_populations(key0, run_base, cum, out_b0, out_r0):
    """Per-run photon-number draws from truncated Poisson tables.

    ``cum`` has one cumulative-weight row per mixture mean on the grid; the
    three uniforms per run (grid pick, blue count, red count) come from the
    first Philox block of the run's source channel stream.
    """
    count = out_b0.shape[0]
    n_grid = cum.shape[0]
    for i in prange(count):
        key1 = (_CH_SOURCE << _CHANNEL_SHIFT) | _U64(run_base + i)
        o0, o1, o2, o3 = _philox4(_ONE, key0, key1)
        g = int(_u53(o0) * n_grid)
        if g >= n_grid:
            g = n_grid - 1
        row = cum[g]
        out_b0[i] = np.searchsorted(row, _u53(o1), side="right")
        out_r0[i] = np.searchsorted(row, _u53(o2), side="right")


@njit(nogil=True, parallel=True, cache=True)
def noise_normals(key0, run_base, out_g):
    """One standard normal per run from the detector channel."""
    count = out_g.shape[0]
    for i in prange(count):
        key1 = (_CH_DETECTOR << _CHANNEL_SHIFT) | _U64(run_base + i)
        o0, o1, o2, o3 = _philox4(_ONE, key0, key1)
        out_g[i] = _norm_ppf(_u_open(o0))


def set_workers(workers: int) -> int:
    """Clamp and apply the numba thread count; returns the previous value."""
    previous = numba.get_num_threads()
    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(max(1, min(int(workers), limit)))
    return previous


def restore_workers(previous: int) -> None:
    numba.set_num_threads(previous)
