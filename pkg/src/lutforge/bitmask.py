"""Bit selection masks over a window of quantizer codes.

A window collects the codes y_n for offsets n = -N+1..0 (slot s = n+N-1, so
slot N-1 is the current sample).  Each code carries b bits via the dyadic
expansion of code-1, MSB first.  A mask picks a subset of the b*N bits,
laid out sample-major and MSB-first: flat position b*s + i selects bit i
(0 = MSB) of slot s.

Masking is pure integer arithmetic: keeping bit set gamma of sample code y
yields the reduced code d = 1 + ((y - 1) & m) where m packs the kept bits
of that slot.  The reduced window d indexes look-up tables through a fixed
mixed-radix encoding (slot 0 most significant).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def dyadic_expand(code: int, bits: int) -> list[int]:
    """Binary digits of code-1, MSB first; the bit weights are 2**(b-i)."""
    if not 1 <= code <= 2**bits:
        raise ValueError(f"code {code} out of range 1..{2**bits}")
    v = code - 1
    return [(v >> (bits - 1 - i)) & 1 for i in range(bits)]


@dataclass(frozen=True)
class BitMask:
    pattern: tuple[int, ...]  # 0/1 flags, sample-major MSB-first
    bits_per_sample: int      # b

    def __post_init__(self):
        b = self.bits_per_sample
        if b < 1:
            raise ValueError(f"bits_per_sample must be >= 1, got {b}")
        if len(self.pattern) == 0 or len(self.pattern) % b != 0:
            raise ValueError(
                f"pattern length {len(self.pattern)} is not a positive multiple of {b}"
            )
        if any(v not in (0, 1) for v in self.pattern):
            raise ValueError("pattern entries must be 0 or 1")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_string(cls, s: str, bits_per_sample: int) -> "BitMask":
        if set(s) - {"0", "1"}:
            raise ValueError(f"mask string must be binary, got {s!r}")
        return cls(tuple(int(c) for c in s), bits_per_sample)

    @classmethod
    def from_positions(cls, positions, bits_per_sample: int, n_window: int) -> "BitMask":
        """Mask with the given 0-based flat positions set."""
        total = bits_per_sample * n_window
        flags = [0] * total
        for p in positions:
            if not 0 <= p < total:
                raise ValueError(f"position {p} out of range 0..{total - 1}")
            flags[p] = 1
        return cls(tuple(flags), bits_per_sample)

    @classmethod
    def naive(cls, bits_per_sample: int, n_window: int, beta: int) -> "BitMask":
        """Keep the last beta positions: newest samples first, MSBs before LSBs."""
        total = bits_per_sample * n_window
        if not 0 <= beta <= total:
            raise ValueError(f"beta {beta} out of range 0..{total}")
        return cls(tuple([0] * (total - beta) + [1] * beta), bits_per_sample)

    @classmethod
    def full(cls, bits_per_sample: int, n_window: int) -> "BitMask":
        return cls((1,) * (bits_per_sample * n_window), bits_per_sample)

    # -- views -------------------------------------------------------------

    @property
    def n_window(self) -> int:
        return len(self.pattern) // self.bits_per_sample

    @property
    def beta(self) -> int:
        """Number of kept bits."""
        return sum(self.pattern)

    @cached_property
    def sample_masks(self) -> tuple[int, ...]:
        """Per-slot AND masks m_s over code-1 values."""
        b = self.bits_per_sample
        out = []
        for s in range(self.n_window):
            m = 0
            for i in range(b):
                m |= self.pattern[b * s + i] << (b - 1 - i)
            out.append(m)
        return tuple(out)

    def to_string(self) -> str:
        return "".join(str(v) for v in self.pattern)

    def with_position(self, position: int) -> "BitMask":
        """Copy with one more flat position set."""
        if self.pattern[position]:
            raise ValueError(f"position {position} already set")
        flags = list(self.pattern)
        flags[position] = 1
        return BitMask(tuple(flags), self.bits_per_sample)

    def __str__(self) -> str:
        return self.to_string()


# -- masking and index arithmetic -------------------------------------------


def apply_mask(window, mask: BitMask) -> np.ndarray:
    """Reduce a window (or batch of windows) of codes to masked codes.

    Args:
        window: int array with trailing axis of length mask.n_window.
        mask: bit selection to apply.

    Returns:
        int64 array, same shape: d = 1 + ((y - 1) & m_s) per slot.
    """
    y = np.asarray(window, dtype=np.int64)
    if y.shape[-1] != mask.n_window:
        raise ValueError(
            f"window length {y.shape[-1]} does not match mask window {mask.n_window}"
        )
    m = np.asarray(mask.sample_masks, dtype=np.int64)
    return 1 + ((y - 1) & m)


def attainable_codes(slot_mask: int, bits: int) -> np.ndarray:
    """Ascending masked codes reachable in one slot: 1 + (submasks of m)."""
    vals = [1 + v for v in range(2**bits) if v & ~slot_mask == 0]
    return np.asarray(vals, dtype=np.int64)


def alphabet_size(mask: BitMask) -> int:
    """Number of attainable masked windows, 2**beta."""
    return 2**mask.beta


def encode_index(window, mask: BitMask) -> np.ndarray:
    """Pack masked windows into scalar table keys.

    Slot 0 occupies the most significant bit positions, matching ascending
    enumeration of windows in slot-lexicographic order.
    """
    d = np.asarray(window, dtype=np.int64)
    b = mask.bits_per_sample
    n = mask.n_window
    shifts = np.asarray([b * (n - 1 - s) for s in range(n)], dtype=np.int64)
    return ((d - 1) << shifts).sum(axis=-1)


def decode_index(key, mask: BitMask) -> np.ndarray:
    """Inverse of encode_index; returns windows with trailing axis N."""
    k = np.asarray(key, dtype=np.int64)
    b = mask.bits_per_sample
    n = mask.n_window
    shifts = np.asarray([b * (n - 1 - s) for s in range(n)], dtype=np.int64)
    return 1 + ((k[..., None] >> shifts) & (2**b - 1))


def enumerate_indices(mask: BitMask) -> np.ndarray:
    """All attainable masked windows, shape (2**beta, N), ascending by key."""
    b = mask.bits_per_sample
    parts = [attainable_codes(m, b) for m in mask.sample_masks]
    grids = np.meshgrid(*parts, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1)


def mirror_index(window, mask: BitMask) -> np.ndarray:
    """Masked window of the negated input.

    Negating the signal mirrors every code k to 2**b + 1 - k, so the masked
    code maps to 1 + ((d - 1) XOR m_s); the map is an involution on the
    attainable set.
    """
    d = np.asarray(window, dtype=np.int64)
    m = np.asarray(mask.sample_masks, dtype=np.int64)
    return 1 + ((d - 1) ^ m)
