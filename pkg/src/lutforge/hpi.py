"""High-probability index sets.

A look-up table need not store every attainable masked window: the smallest
set whose total probability reaches a target coverage epsilon is the prefix
of the indices sorted by descending probability.  Exact construction
enumerates the 2**beta-sized alphabet; when that is out of reach, drawing
windows from the signal model and keeping the unique ones lands near a
predictable coverage (see expected_coverage).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitmask import BitMask, apply_mask, decode_index, encode_index
from .estimator import LikelihoodContext, index_moments, _check_window
from .quantizer import get_quantizer
from .tone import ToneModel

EXACT_CAP = 2**24       # largest alphabet enumerated exactly
_MC_CHUNK = 1 << 15     # draws per rng stream chunk


@dataclass(frozen=True, eq=False)
class HpiSet:
    mask: BitMask
    keys: np.ndarray          # encoded indices, descending probability
    probs: np.ndarray         # per-entry probability (see prob_mode)
    coverage: float           # achieved total mass (exact) or estimate
    method: str               # "exact" | "monte-carlo"
    prob_mode: str            # "exact" | "estimated"
    epsilon: float | None     # requested coverage (exact mode)
    draws: int | None = None  # Monte-Carlo draw count
    seed: int | None = None
    counts: np.ndarray | None = None  # Monte-Carlo hit counts per entry

    def __len__(self) -> int:
        return int(self.keys.size)

    @property
    def windows(self) -> np.ndarray:
        """Entries as code windows, shape (L, N)."""
        return decode_index(self.keys, self.mask)


def index_probability(d, mask: BitMask, ctx: LikelihoodContext) -> float:
    """Marginal probability p(d) of one masked window under the tone prior."""
    d = _check_window(d, mask)
    key = encode_index(d, mask)
    _, den, _ = index_moments(ctx, mask, keys=np.asarray([key]), want_num=False)
    return float(den[0])


def _rank(keys, probs):
    """Sort descending by probability, ties by ascending key."""
    order = np.lexsort((keys, -probs))
    return keys[order], probs[order], order


def build_hpi_exact(
    epsilon: float,
    mask: BitMask,
    ctx: LikelihoodContext,
    cap: int = EXACT_CAP,
) -> HpiSet:
    """Smallest index set with total probability >= epsilon.

    Enumerates all 2**beta attainable windows, sorts by descending
    probability and keeps the shortest prefix reaching epsilon.  At
    epsilon = 1 the set is every window with nonzero probability.

    Raises:
        ValueError: when 2**beta exceeds the cap; use the Monte-Carlo
            construction instead.
    """
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if 2**mask.beta > cap:
        raise ValueError(
            f"2**{mask.beta} indices exceed the exact-construction cap {cap}; "
            "use build_hpi_montecarlo"
        )
    keys, den, _ = index_moments(ctx, mask, want_num=False)
    keys, probs, _ = _rank(keys, den)
    cum = np.cumsum(probs)
    n_nonzero = int(np.count_nonzero(probs))
    if epsilon >= 1 or epsilon > cum[-1]:
        count = n_nonzero
    else:
        count = int(np.searchsorted(cum, epsilon, side="left")) + 1
    count = max(count, 1)
    return HpiSet(
        mask=mask,
        keys=keys[:count].copy(),
        probs=probs[:count].copy(),
        coverage=float(cum[count - 1]),
        method="exact",
        prob_mode="exact",
        epsilon=float(epsilon),
    )


def build_hpi_montecarlo(
    draws: int,
    mask: BitMask,
    model: ToneModel,
    seed: int,
    ctx: LikelihoodContext | None = None,
    attach_cap: int = EXACT_CAP,
) -> HpiSet:
    """Approximate HPI set from simulated windows.

    Draws windows with uniform phase and Gaussian noise, quantizes, masks,
    and keeps the union of unique indices.  Draws are chunked with split
    rng streams (child = SeedSequence(seed, spawn_key=(chunk,))) and merged
    deterministically, so the result depends only on (seed, draws).

    When a context is supplied and the alphabet is within attach_cap, each
    entry gets its exact probability and the coverage is their sum.
    Otherwise probabilities are empirical frequencies flagged "estimated"
    and the coverage estimate is the Good-Turing complement
    1 - (#singletons)/draws.
    """
    if draws < 1:
        raise ValueError(f"draws must be >= 1, got {draws}")
    quantizer = get_quantizer(mask.bits_per_sample)
    n = mask.n_window
    offsets = np.arange(-(n - 1), 1, dtype=float)
    all_keys = []
    for c, start in enumerate(range(0, draws, _MC_CHUNK)):
        m = min(_MC_CHUNK, draws - start)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        phase = rng.uniform(0.0, 2 * math.pi, size=m)
        x = model.amplitude * np.cos(
            2 * math.pi * model.freq * offsets[None, :] + phase[:, None]
        )
        x += model.sigma * rng.standard_normal((m, n))
        codes = quantizer.quantize(x, rng)
        all_keys.append(encode_index(apply_mask(codes, mask), mask))
    keys, counts = np.unique(np.concatenate(all_keys), return_counts=True)

    if ctx is not None and 2**mask.beta <= attach_cap:
        _, den, _ = index_moments(ctx, mask, keys=keys, want_num=False)
        keys, probs, order = _rank(keys, den)
        return HpiSet(
            mask=mask,
            keys=keys,
            probs=probs,
            coverage=float(probs.sum()),
            method="monte-carlo",
            prob_mode="exact",
            epsilon=None,
            draws=int(draws),
            seed=int(seed),
            counts=counts[order],
        )
    freq = counts / draws
    keys, probs, order = _rank(keys, freq)
    singletons = int(np.count_nonzero(counts == 1))
    return HpiSet(
        mask=mask,
        keys=keys,
        probs=probs,
        coverage=float(1.0 - singletons / draws),
        method="monte-carlo",
        prob_mode="estimated",
        epsilon=None,
        draws=int(draws),
        seed=int(seed),
        counts=counts[order],
    )


def expected_coverage(draws: int, probs, tol: float = 1e-6) -> float:
    """Expected total mass of the unique-index set after the given draws.

    For independent draws, index j appears with probability 1-(1-p_j)^draws,
    so the expected covered mass is 1 - sum_j p_j*(1-p_j)^draws.

    Args:
        probs: full index distribution; must sum to 1 within tol.
    """
    p = np.asarray(probs, dtype=float)
    if draws < 0:
        raise ValueError(f"draws must be >= 0, got {draws}")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probabilities sum to {p.sum()}, expected 1 within {tol}")
    return float(1.0 - np.sum(p * np.power(1.0 - p, draws)))


# -- serialization -----------------------------------------------------------


def write_hpi(hpi: HpiSet, path) -> None:
    """Text format: header key=value lines, then one entry per line as
    comma-separated codes followed by the probability."""
    lines = [
        f"b={hpi.mask.bits_per_sample}",
        f"N={hpi.mask.n_window}",
        f"mask={hpi.mask.to_string()}",
        "epsilon=" + ("" if hpi.epsilon is None else f"{hpi.epsilon:.17g}"),
        f"method={hpi.method}",
        "seed=" + ("" if hpi.seed is None else str(hpi.seed)),
        f"prob_mode={hpi.prob_mode}",
        f"coverage={hpi.coverage:.17g}",
        "draws=" + ("" if hpi.draws is None else str(hpi.draws)),
    ]
    for win, p in zip(hpi.windows, hpi.probs):
        lines.append(",".join(str(int(c)) for c in win) + f",{p:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_hpi(path) -> HpiSet:
    with open(path) as fh:
        raw = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = {}
    body = []
    for ln in raw:
        if "=" in ln and not ln[0].isdigit():
            k, _, v = ln.partition("=")
            header[k] = v
        else:
            body.append(ln)
    mask = BitMask.from_string(header["mask"], int(header["b"]))
    wins = []
    probs = []
    for ln in body:
        parts = ln.split(",")
        wins.append([int(c) for c in parts[:-1]])
        probs.append(float(parts[-1]))
    keys = encode_index(np.asarray(wins, dtype=np.int64), mask)
    return HpiSet(
        mask=mask,
        keys=keys,
        probs=np.asarray(probs),
        coverage=float(header["coverage"]),
        method=header["method"],
        prob_mode=header["prob_mode"],
        epsilon=float(header["epsilon"]) if header["epsilon"] else None,
        draws=int(header["draws"]) if header.get("draws") else None,
        seed=int(header["seed"]) if header["seed"] else None,
    )
