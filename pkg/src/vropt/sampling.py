"""Seeded randomness and nonuniform component-sampling distributions.

Every solver run draws its component indices from a :class:`SamplingDistribution`
via inverse-CDF lookup driven by a :class:`SeededRng`.  The generator is
splitmix64 (Steele/Vigna), chosen because its 64-bit state and integer-only
update reproduce bit-for-bit across platforms and across the compiled/pure
Python solver paths.  Synthetic *data* generation elsewhere in the package
uses ``numpy.random.Generator(PCG64)``, which is likewise fixed and
documented; this module only owns the in-loop sampling stream.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SeededRng:
    """splitmix64 stream with 64-bit state.

    Identical seeds produce identical draw sequences everywhere; the state
    can be exported (``state`` attribute) into run metadata and restored to
    resume a stream.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _mix64(self.state)

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random mantissa bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def normal(self) -> float:
        """Standard normal via Box-Muller (used only in small tests)."""
        u1 = max(self.uniform(), _INV_2_53)
        u2 = self.uniform()
        return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))


def derive_seed(base_seed: int, run_index: int) -> int:
    """Mix a base seed with a run index into an independent child seed.

    Concurrent experiments each get ``derive_seed(base, k)`` so their
    splitmix64 streams never overlap the parent stream (the mixing constant
    differs from the stream increment).
    """
    return _mix64((base_seed ^ 0xD1B54A32D192ED03) + run_index * _GOLDEN & _MASK64)


class SamplingDistribution:
    """Probability vector over ``m`` components with a cumulative table.

    Sampling is inverse-CDF binary search on the cumulative table; the table
    is forced to end exactly at 1.0 so every uniform draw maps to an index.
    """

    __slots__ = ("probabilities", "cumulative")

    def __init__(self, probabilities):
        p = np.asarray(probabilities, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probability vector must be a nonempty 1-d array")
        if np.any(p <= 0.0):
            raise ValueError("all probabilities must be positive")
        total = p.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1 within 1e-12")
        cum = np.cumsum(p)
        cum[-1] = 1.0
        if np.any(np.diff(cum) <= 0.0):
            raise ValueError("cumulative table must be strictly increasing")
        self.probabilities = p
        self.cumulative = cum

    @property
    def m(self) -> int:
        return self.probabilities.size

    def sample(self, rng: SeededRng) -> int:
        """Draw one index i with probability ``probabilities[i]`` (0-based)."""
        return bisect_right(self.cumulative, rng.uniform())

    def sample_many(self, rng: SeededRng, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.int64)
        cum = self.cumulative
        for k in range(count):
            out[k] = bisect_right(cum, rng.uniform())
        return out


def ssnm_distribution(L) -> SamplingDistribution:
    """pi_i = sqrt(L_i)/(2 sum_j sqrt(L_j)) + 1/(2m).

    The square-root weighting matches how often badly conditioned components
    must be visited; the uniform half guarantees pi_i >= 1/(2m) so every
    anchor keeps being refreshed.
    """
    L = np.asarray(L, dtype=np.float64)
    if L.size == 0:
        raise ValueError("need at least one smoothness constant")
    if np.any(L <= 0.0):
        raise ValueError("all smoothness constants must be positive")
    r = np.sqrt(L)
    pi = r / (2.0 * r.sum()) + 1.0 / (2.0 * L.size)
    return SamplingDistribution(pi / pi.sum())


def katyusha_distribution(B, L) -> SamplingDistribution:
    """pi_i = B_i L_i / sum_j B_j L_j."""
    B = np.asarray(B, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    if B.shape != L.shape or B.size == 0:
        raise ValueError("B and L must be nonempty vectors of equal length")
    if np.any(B <= 0.0) or np.any(L <= 0.0):
        raise ValueError("all entries of B and L must be positive")
    w = B * L
    return SamplingDistribution(w / w.sum())


def reduced_distribution(l) -> SamplingDistribution:
    """pi_i = l_i / sum_j l_j."""
    l = np.asarray(l, dtype=np.float64)
    if l.size == 0:
        raise ValueError("need at least one constant")
    if np.any(l <= 0.0):
        raise ValueError("all constants must be positive")
    return SamplingDistribution(l / l.sum())


def uniform_distribution(m: int) -> SamplingDistribution:
    if m < 1:
        raise ValueError("m must be positive")
    return SamplingDistribution(np.full(m, 1.0 / m))
