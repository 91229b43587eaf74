"""Dither generation, the three table architectures, and runtime lookup.

A table maps a masked window index to a corrected output code.  Dither
de-correlates the residual quantization error from the input at the price
of a small MSE increase; it can be burned into the stored codes or applied
at runtime:

    intra  one table; each entry is Q_b(xhat + v) with one hard-coded
           dither realization (the Xi = 1 special case of inter),
    inter  Xi tables with independent hard-coded realizations; runtime
           picks a table uniformly per lookup,
    post   one table of rho-bit codes Q_rho(xhat); runtime adds a discrete
           dither to the reconstructed value and requantizes to b bits.

Design-time dither is continuous (the stored result is a b-bit code either
way); the runtime dither of the post architecture is necessarily discrete:
uniform over a symmetric rho-bit-grid point set inside [-alpha*step/2,
alpha*step/2].  Windows whose index is absent from the table fall back to
the current input code y_0 unchanged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bitmask import BitMask, apply_mask, decode_index, encode_index
from .metrics import memory_bits
from .quantizer import get_quantizer

ARCHITECTURES = ("intra", "inter", "post")


def sample_dither(alpha: float, step: float, rng: np.random.Generator, size=None):
    """Continuous dither, uniform on [-alpha*step/2, alpha*step/2].

    alpha = 0 yields exactly 0 (and still consumes the stream, so runs with
    different alpha stay draw-aligned).
    """
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    half = alpha * step / 2
    return rng.uniform(-half, half, size=size)


def discrete_dither_support(alpha: float, step: float, rho: int) -> np.ndarray:
    """Grid points available to the discrete dither.

    The rho-bit grid has pitch 2**(-rho + 1); the support holds
    floor(alpha*step/pitch) + 1 points, equally spaced by the pitch and
    symmetric about 0 (so the mean is 0 by construction).  An odd count
    lands on integer multiples of the pitch, an even count on half-offset
    points; both lie on a rho-bit grid.
    """
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if rho < 1:
        raise ValueError(f"rho must be >= 1, got {rho}")
    pitch = 2.0 ** (-rho + 1)
    count = int(np.floor(alpha * step / pitch)) + 1
    return (np.arange(count) - (count - 1) / 2) * pitch


def sample_discrete_dither(alpha: float, step: float, rho: int, rng: np.random.Generator, size=None):
    """Uniform draw from the discrete dither support.

    Warns (and returns 0) when a nonzero alpha requests a support smaller
    than the grid pitch.
    """
    support = discrete_dither_support(alpha, step, rho)
    if alpha > 0 and support.size == 1:
        warnings.warn(
            f"dither span alpha*step = {alpha * step} is below the rho={rho} "
            "grid pitch; discrete dither is identically zero",
            RuntimeWarning,
            stacklevel=2,
        )
    return support[rng.integers(0, support.size, size=size)]


@dataclass(frozen=True)
class DitherSpec:
    alpha: float            # dither span as a fraction of the output step
    architecture: str       # intra | inter | post
    bits: int               # output resolution b
    tables: int = 1         # Xi, inter-table count
    rho: int = 8            # stored-entry precision of the post architecture

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.bits < 1:
            raise ValueError(f"bits must be >= 1, got {self.bits}")
        if self.tables < 1:
            raise ValueError(f"tables must be >= 1, got {self.tables}")
        if self.architecture == "intra" and self.tables != 1:
            raise ValueError("intra architecture is single-table; use inter for Xi > 1")
        if self.architecture == "post" and self.rho < self.bits:
            raise ValueError(f"post architecture needs rho >= b, got rho={self.rho} b={self.bits}")

    @property
    def entry_bits(self) -> int:
        return self.rho if self.architecture == "post" else self.bits


@dataclass(frozen=True, eq=False)
class LutTable:
    spec: DitherSpec
    mask: BitMask
    keys: np.ndarray        # encoded indices, ascending (L,)
    values: np.ndarray      # stored codes, (tables, L); post uses one row
    epsilon: float | None   # HPI coverage target, None = full index set
    seed: int               # design-time rng seed

    @property
    def entries(self) -> int:
        return int(self.keys.size)

    @property
    def memory_bits(self) -> int:
        return memory_bits(
            self.spec.entry_bits, self.entries, self.spec.architecture, self.spec.tables
        )


def build_lut(estimates, spec: DitherSpec, mask: BitMask, seed: int, epsilon: float | None = None) -> LutTable:
    """Assemble a table from the per-index posterior-mean estimates.

    Args:
        estimates: mapping from index (encoded key or window tuple) to the
            high-precision estimate xhat, or a (keys, xhat) array pair.
        spec: architecture, alpha, and precisions.
        seed: design-time dither stream; the build is deterministic in it.
        epsilon: recorded coverage target of the index set (metadata only).

    intra/inter store requantize(xhat + v) with tables-many independent
    continuous dither draws per entry; post stores requantize(xhat, rho)
    with no design-time dither.
    """
    if spec.bits != mask.bits_per_sample:
        raise ValueError(
            f"spec bits {spec.bits} does not match mask bits {mask.bits_per_sample}"
        )
    if isinstance(estimates, tuple):
        keys, xhat = estimates
        keys = np.asarray(keys, dtype=np.int64)
        xhat = np.asarray(xhat, dtype=float)
    else:
        items = []
        for k, v in estimates.items():
            if isinstance(k, (tuple, list)):
                k = int(encode_index(np.asarray(k, dtype=np.int64), mask))
            items.append((int(k), float(v)))
        items.sort()
        keys = np.asarray([k for k, _ in items], dtype=np.int64)
        xhat = np.asarray([v for _, v in items])
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    xhat = xhat[order]
    if keys.size == 0:
        raise ValueError("estimates are empty")
    if np.any(np.diff(keys) == 0):
        raise ValueError("duplicate index keys in estimates")

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    out_q = get_quantizer(spec.bits)
    if spec.architecture == "post":
        values = get_quantizer(spec.rho).quantize(xhat, rng)[None, :]
    else:
        v = sample_dither(spec.alpha, out_q.step, rng, size=(spec.tables, keys.size))
        values = out_q.quantize(xhat[None, :] + v, rng)
    return LutTable(spec=spec, mask=mask, keys=keys, values=values,
                    epsilon=epsilon, seed=int(seed))


# -- runtime lookup ----------------------------------------------------------


def lookup_stream(lut: LutTable, windows, rng: np.random.Generator | None = None):
    """Correct a batch of windows; total on any input.

    Args:
        windows: int array (..., N) of raw codes, slot N-1 = current sample.
        rng: runtime randomness (inter table choice, post dither and
            requantization tie-breaks).  Optional for intra.

    Returns:
        (codes, fallbacks): b-bit output codes shaped like windows minus
        the last axis, and the count of index misses that fell back to the
        current input code.
    """
    spec = lut.spec
    if spec.architecture != "intra" and rng is None:
        raise ValueError(f"{spec.architecture} lookup needs an rng")
    w = np.asarray(windows, dtype=np.int64)
    shape = w.shape[:-1]
    w = w.reshape(-1, w.shape[-1])
    key = encode_index(apply_mask(w, lut.mask), lut.mask)
    pos = np.searchsorted(lut.keys, key)
    pos_c = np.minimum(pos, lut.entries - 1)
    found = lut.keys[pos_c] == key
    out = np.where(found, 0, w[:, -1]).astype(np.int64)  # misses pass y_0 through
    idx = pos_c[found]
    if spec.architecture == "intra":
        hit_vals = lut.values[0, idx]
    elif spec.architecture == "inter":
        table = rng.integers(0, spec.tables, size=idx.size)
        hit_vals = lut.values[table, idx]
    else:
        stored = lut.values[0, idx]
        x = get_quantizer(spec.rho).reconstruct(stored)
        x = x + sample_discrete_dither(spec.alpha, get_quantizer(spec.bits).step,
                                       spec.rho, rng, size=idx.size)
        hit_vals = get_quantizer(spec.bits).quantize(x, rng)
    out[found] = hit_vals
    return out.reshape(shape), int(np.size(found) - np.count_nonzero(found))


def lookup(lut: LutTable, window, rng: np.random.Generator | None = None) -> int:
    """Single-window lookup; see lookup_stream."""
    codes, _ = lookup_stream(lut, np.asarray(window)[None, :], rng)
    return int(codes[0])


def lookup_estimates(lut: LutTable, windows) -> np.ndarray:
    """High-precision estimate stream of a post table (reconstructed rho-bit
    values; misses fall back to the b-bit midpoint of y_0)."""
    if lut.spec.architecture != "post":
        raise ValueError("estimate stream is only stored by the post architecture")
    w = np.asarray(windows, dtype=np.int64)
    shape = w.shape[:-1]
    w = w.reshape(-1, w.shape[-1])
    key = encode_index(apply_mask(w, lut.mask), lut.mask)
    pos = np.searchsorted(lut.keys, key)
    pos_c = np.minimum(pos, lut.entries - 1)
    found = lut.keys[pos_c] == key
    out = np.where(
        found,
        get_quantizer(lut.spec.rho).reconstruct(lut.values[0, pos_c]),
        get_quantizer(lut.spec.bits).reconstruct(w[:, -1]),
    )
    return out.reshape(shape)


# -- serialization -----------------------------------------------------------


def write_lut(lut: LutTable, path) -> None:
    """Line-oriented text format; see read_lut for the exact grammar."""
    spec = lut.spec
    lines = [
        f"b={spec.bits}",
        f"rho={spec.rho}",
        f"N={lut.mask.n_window}",
        f"arch={spec.architecture}",
        f"xi={spec.tables}",
        f"alpha={spec.alpha:.17g}",
        f"mask={lut.mask.to_string()}",
        "epsilon=" + ("" if lut.epsilon is None else f"{lut.epsilon:.17g}"),
        f"seed={lut.seed}",
    ]
    windows = decode_index(lut.keys, lut.mask)
    for j in range(lut.entries):
        codes = ",".join(str(int(c)) for c in windows[j])
        for i in range(spec.tables if spec.architecture != "post" else 1):
            lines.append(f"INDEX {codes} TABLE {i} VALUE {int(lut.values[i, j])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_lut(path) -> LutTable:
    header = {}
    entries = []
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln:
                continue
            if ln.startswith("INDEX"):
                parts = ln.split()
                codes = tuple(int(c) for c in parts[1].split(","))
                entries.append((codes, int(parts[3]), int(parts[5])))
            else:
                k, _, v = ln.partition("=")
                header[k] = v
    mask = BitMask.from_string(header["mask"], int(header["b"]))
    spec = DitherSpec(
        alpha=float(header["alpha"]),
        architecture=header["arch"],
        bits=int(header["b"]),
        tables=int(header["xi"]),
        rho=int(header["rho"]),
    )
    key_of = {}
    for codes, _, _ in entries:
        key_of[codes] = int(encode_index(np.asarray(codes, dtype=np.int64), mask))
    keys = np.asarray(sorted(set(key_of.values())), dtype=np.int64)
    n_tables = spec.tables if spec.architecture != "post" else 1
    values = np.zeros((n_tables, keys.size), dtype=np.int64)
    pos = {int(k): j for j, k in enumerate(keys)}
    for codes, i, val in entries:
        values[i, pos[key_of[codes]]] = val
    return LutTable(
        spec=spec,
        mask=mask,
        keys=keys,
        values=values,
        epsilon=float(header["epsilon"]) if header["epsilon"] else None,
        seed=int(header["seed"]),
    )


def export_hex(lut: LutTable, path) -> None:
    """Memory-init image: one stored word per line as zero-padded hex of the
    code minus 1 (so a word spans exactly entry_bits bits), addresses
    ascending by index key, tables concatenated in order."""
    width = -(-lut.spec.entry_bits // 4)
    n_tables = lut.spec.tables if lut.spec.architecture != "post" else 1
    with open(path, "w") as fh:
        for i in range(n_tables):
            for j in range(lut.entries):
                fh.write(format(int(lut.values[i, j]) - 1, f"0{width}x") + "\n")
