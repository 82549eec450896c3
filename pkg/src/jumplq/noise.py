"""Counter-based noise plan: reproducible draws addressed by coordinates.

Every random number is generated by keying a Philox counter-based generator
with (seed, step, channel) and taking element ``p`` of the resulting block
for path ``p``.  Draws therefore depend only on those coordinates, never on
batch size, evaluation order, or thread count, which makes simulations
byte-reproducible and gives common random numbers across control laws for
free.  Channel 0 carries the Brownian increments, channels 1..K the mark
counts, and a high reserved channel the probe-control draws.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

BROWNIAN_CHANNEL = 0
PROBE_CHANNEL = 0xFFFF

_MAX_STEP = 1 << 48


def poisson_icdf(u, lam):
    """Smallest k with Poisson(lam) CDF(k) >= u, vectorized over u in (0, 1).

    Walks the CDF with the multiplicative pmf recurrence; exact for the
    moderate means (lam = intensity * step) that arise on simulation grids.
    """
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape, dtype=np.int64)
    if lam <= 0.0:
        return out
    pmf = math.exp(-lam)
    cdf = pmf
    unsettled = u > cdf
    k = 0
    # Past this point the CDF is 1 up to rounding; cap to guarantee termination.
    kmax = int(lam + 40.0 * math.sqrt(lam + 1.0) + 64.0)
    while unsettled.any():
        k += 1
        if k > kmax:
            out[unsettled] = kmax
            break
        pmf *= lam / k
        cdf += pmf
        out[unsettled] = k
        unsettled = u > cdf
    return out


@dataclass(frozen=True)
class NoisePlan:
    """Addressable randomness for a batch of simulation paths."""

    seed: int
    paths: int

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must fit in uint64, got {self.seed!r}")
        if self.paths < 1:
            raise ValueError(f"paths must be >= 1, got {self.paths!r}")

    def prefix(self, paths):
        """Plan over the first ``paths`` paths; draws are a true prefix."""
        return NoisePlan(seed=self.seed, paths=min(self.paths, paths))

    def uniforms(self, step, channel):
        """Uniform draws strictly inside (0, 1), one per path."""
        if not 0 <= step < _MAX_STEP:
            raise ValueError(f"step must fit in 48 bits, got {step!r}")
        key = np.array([self.seed, (channel << 48) | step], dtype=np.uint64)
        raw = np.random.Philox(key=key).random_raw(self.paths)
        # Top 53 bits, offset by half a ulp so 0 and 1 are unreachable.
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def brownian(self, step, h):
        """Brownian increments over one step of width h, one per path."""
        return math.sqrt(h) * ndtri(self.uniforms(step, BROWNIAN_CHANNEL))

    def mark_counts(self, step, lambdas):
        """Poisson counts per mark over one step, shape (paths, K).

        ``lambdas`` are the per-mark means intensity * h.
        """
        lambdas = np.asarray(lambdas, dtype=float)
        out = np.empty((self.paths, lambdas.shape[0]), dtype=np.int64)
        for i, lam in enumerate(lambdas):
            out[:, i] = poisson_icdf(self.uniforms(step, 1 + i), lam)
        return out

    def probe_normals(self, index, count):
        """Standard normals for constructing probe controls, keyed off the reserved channel."""
        if not 0 <= index < _MAX_STEP:
            raise ValueError(f"probe index must fit in 48 bits, got {index!r}")
        key = np.array([self.seed, (PROBE_CHANNEL << 48) | index], dtype=np.uint64)
        raw = np.random.Philox(key=key).random_raw(int(count))
        return ndtri(((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53)
