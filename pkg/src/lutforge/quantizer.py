"""Mid-riser uniform quantizer on the normalized range [-1, 1].

A b-bit quantizer has step size delta = 2**(-b + 1) and codes 1..2**b.
The finite decision thresholds are T_k = (k - 1 - 2**(b-1)) * delta for
k = 2..2**b; the outermost cells extend to -inf and +inf.  Reconstruction
maps code k to the cell midpoint (k - 1/2 - 2**(b-1)) * delta, which
equals +/-(1 - delta/2) at the extremes.

Inputs landing exactly on a finite threshold are resolved to the upper or
lower adjacent code with probability 1/2 each, emulating a meta-stable
comparator.  Because delta is a power of two, x/delta is computed exactly
and threshold hits are detected exactly in binary floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np


@dataclass(frozen=True)
class UniformQuantizer:
    bits: int  # resolution b >= 1; codes run 1..2**bits

    def __post_init__(self):
        if not isinstance(self.bits, int) or self.bits < 1:
            raise ValueError(f"bits must be a positive integer, got {self.bits!r}")

    @property
    def step(self) -> float:
        """Quantization step delta = 2**(-b + 1)."""
        return 2.0 ** (-self.bits + 1)

    @property
    def n_codes(self) -> int:
        return 2 ** self.bits

    @cached_property
    def thresholds(self) -> np.ndarray:
        """Cell edges T_1..T_{2^b + 1}; T_1 = -inf, T_{2^b + 1} = +inf."""
        k = np.arange(1, self.n_codes + 2, dtype=float)
        edges = (k - 1 - 2 ** (self.bits - 1)) * self.step
        edges[0] = -np.inf
        edges[-1] = np.inf
        return edges

    @cached_property
    def midpoints(self) -> np.ndarray:
        """Reconstruction levels for codes 1..2**b."""
        k = np.arange(1, self.n_codes + 1, dtype=float)
        return (k - 0.5 - 2 ** (self.bits - 1)) * self.step

    def quantize(self, x, rng: np.random.Generator | None = None):
        """Map input samples to codes 1..2**b.

        Args:
            x: scalar or array of finite floats.
            rng: source of tie-break bits.  Only consulted when a sample
                lies exactly on a finite threshold; required in that case.

        Returns:
            int for scalar input, int64 array otherwise.
        """
        arr = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("quantize requires finite inputs")
        half = 2 ** (self.bits - 1)
        t = arr.reshape(-1) * half  # exact: scaling by a power of two
        base = np.floor(t)
        code = np.clip(base.astype(np.int64) + half + 1, 1, self.n_codes)
        hits = (t == base) & (t >= 1 - half) & (t <= half - 1)
        if np.any(hits):
            if rng is None:
                raise ValueError(
                    "input lies exactly on a quantizer threshold; "
                    "pass rng to resolve the meta-stable comparison"
                )
            idx = np.flatnonzero(hits)
            code[idx] -= rng.integers(0, 2, size=idx.size)
        if arr.ndim == 0:
            return int(code[0])
        return code.reshape(arr.shape)

    def reconstruct(self, code):
        """Map codes back to cell midpoints.  Codes must lie in 1..2**b."""
        arr = np.asarray(code)
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"codes must be integers, got dtype {arr.dtype}")
        if np.any(arr < 1) or np.any(arr > self.n_codes):
            raise ValueError(f"codes out of range 1..{self.n_codes}")
        out = self.midpoints[arr - 1]
        if arr.ndim == 0:
            return float(out)
        return out


@lru_cache(maxsize=None)
def get_quantizer(bits: int) -> UniformQuantizer:
    """Shared quantizer instances; the derived tables are tiny but reused often."""
    return UniformQuantizer(bits)


def requantize(x, bits: int, rng: np.random.Generator | None = None):
    """Re-quantize reconstructed values to a b_out-bit grid (same tie-break rule)."""
    return get_quantizer(bits).quantize(x, rng)
