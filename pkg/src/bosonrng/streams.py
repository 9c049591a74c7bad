"""Counter-based per-run random streams.

Every stochastic stage of the simulator draws from its own stream so that
results are reproducible bit for bit under any execution order or degree of
parallelism. A stream is a Philox-4x64-10 generator keyed by

    key0 = master_seed
    key1 = channel * 2**56 + run_index

with the 256-bit block counter starting at 1. Keying and counter convention
match numpy, so the uniform stream of ``(seed, channel, run_index)`` equals
``np.random.Generator(np.random.Philox(key=[key0, key1])).random(...)``
exactly; the test suite checks this against numpy directly.

Channels: 0 = urn transition draws, 1 = detector noise, 2 = input-population
(photon number) draws.

Fixed variate mappings, recorded in output metadata via STREAM_DERIVATION:

    uniform in [0, 1):  (out >> 11) * 2**-53
    standard normal:    ppnd16(((out >> 12) * 2 + 1) * 2**-53)

``ppnd16`` is Wichura's AS 241 rational approximation of the normal quantile
function (double precision, relative error below 1e-15). This module is the
pure-Python reference implementation; the jitted kernels in ``_kernels``
replicate it operation for operation and are tested for exact agreement.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1

# Philox-4x64 round multipliers and Weyl key increments (Random123 constants).
PHILOX_M0 = 0xD2E7470EE14C6C93
PHILOX_M1 = 0xCA5A826395121157
PHILOX_W0 = 0x9E3779B97F4A7C15
PHILOX_W1 = 0xBB67AE8584CAA73B
PHILOX_ROUNDS = 10

CHANNEL_URN = 0
CHANNEL_DETECTOR = 1
CHANNEL_SOURCE = 2

_CHANNEL_SHIFT = 56
MAX_RUN_INDEX = (1 << _CHANNEL_SHIFT) - 1

UNIFORM_SCALE = 1.0 / 9007199254740992.0  # 2**-53

STREAM_DERIVATION = (
    "philox4x64-10;key0=master_seed;key1=channel*2^56+run_index;counter-from-1;"
    "uniform=(out>>11)*2^-53;normal=ppnd16(((out>>12)*2+1)*2^-53);"
    "channels:urn=0,detector=1,source=2"
)


def derive_key(master_seed: int, channel: int, run_index: int) -> tuple[int, int]:
    """Map (master seed, channel, run index) to a 128-bit Philox key."""
    if not 0 <= master_seed <= MASK64:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master_seed}")
    if channel not in (CHANNEL_URN, CHANNEL_DETECTOR, CHANNEL_SOURCE):
        raise ValueError(f"unknown stream channel {channel}")
    if not 0 <= run_index <= MAX_RUN_INDEX:
        raise ValueError(f"run index must be in [0, 2^56), got {run_index}")
    return master_seed, (channel << _CHANNEL_SHIFT) | run_index


def philox_block(counter: int, key0: int, key1: int) -> tuple[int, int, int, int]:
    """One Philox-4x64-10 block: 256-bit counter -> four 64-bit outputs."""
    c0 = counter & MASK64
    c1 = (counter >> 64) & MASK64
    c2 = (counter >> 128) & MASK64
    c3 = (counter >> 192) & MASK64
    k0, k1 = key0, key1
    for _ in range(PHILOX_ROUNDS):
        prod0 = c0 * PHILOX_M0
        prod1 = c2 * PHILOX_M1
        c0 = (prod1 >> 64) ^ c1 ^ k0
        c1 = prod1 & MASK64
        c2 = (prod0 >> 64) ^ c3 ^ k1
        c3 = prod0 & MASK64
        k0 = (k0 + PHILOX_W0) & MASK64
        k1 = (k1 + PHILOX_W1) & MASK64
    return c0, c1, c2, c3


def norm_ppf(p: float) -> float:
    """Normal quantile function, AS 241 (PPND16)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal quantile argument must lie in (0, 1), got {p}")
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
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
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
    return -x if q < 0.0 else x


class PhiloxStream:
    """Sequential view of one derived stream; reference for the jitted kernels."""

    def __init__(self, master_seed: int, channel: int, run_index: int = 0):
        self.key0, self.key1 = derive_key(master_seed, channel, run_index)
        self._counter = 0
        self._buffer: tuple[int, int, int, int] = (0, 0, 0, 0)
        self._pos = 4

    def next_raw(self) -> int:
        """Next raw 64-bit output."""
        if self._pos == 4:
            self._counter += 1
            self._buffer = philox_block(self._counter, self.key0, self.key1)
            self._pos = 0
        out = self._buffer[self._pos]
        self._pos += 1
        return out

    def random(self) -> float:
        """Uniform variate in [0, 1); equals numpy Generator.random() draws."""
        return (self.next_raw() >> 11) * UNIFORM_SCALE

    def uniforms(self, n: int) -> list[float]:
        return [self.random() for _ in range(n)]

    def normal(self) -> float:
        """Standard normal variate via the inverse CDF on an open-interval uniform."""
        u = ((self.next_raw() >> 12) * 2 + 1) * UNIFORM_SCALE
        return norm_ppf(u)


def urn_stream(master_seed: int, run_index: int) -> PhiloxStream:
    return PhiloxStream(master_seed, CHANNEL_URN, run_index)


def detector_stream(master_seed: int, run_index: int) -> PhiloxStream:
    return PhiloxStream(master_seed, CHANNEL_DETECTOR, run_index)


def source_stream(master_seed: int, run_index: int) -> PhiloxStream:
    return PhiloxStream(master_seed, CHANNEL_SOURCE, run_index)
