"""Mask-quality heuristics and brute-force / greedy mask search.

All heuristics are analytic scores (lower is better) computed on the
quadrature-discretized model, so candidate comparisons are free of
simulation noise:

    H0  rank proxy for the naive sequential mask (score fixed at 0; the
        mask itself is given by construction, not by search),
    H1  negated expected Fisher information -E[I(x0|q)],
    H2  expected inverse Fisher information E[1/I(x0|q)] (a CRLB average;
        can blow up when I vanishes at a node),
    H3  expected squared error of the MMSE estimator, evaluated through
        the moment identity E[x0^2] - sum_d num(d)^2/den(d).

The greedy search adds one bit per iteration, scanning candidate positions
in ascending order and accepting on <=, so ties favor the largest position:
bits closer to the current sample and to the LSB end of each sample.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .bitmask import BitMask
from .estimator import (
    LikelihoodContext,
    index_moments,
    node_information,
    prior_second_moment,
)

HEURISTICS = ("H0", "H1", "H2", "H3")

# Probabilities below this are dropped from the H3 sum; conditioning on an
# index this rare contributes nothing measurable to expected error.
_DEN_FLOOR = 1e-300

BRUTE_FORCE_CAP = 12  # max bN for exhaustive search (2**bN candidates)


def eval_heuristic(name: str, mask: BitMask, ctx: LikelihoodContext) -> float:
    """Score a mask under one of the H0..H3 heuristics (lower is better).

    H2 returns +inf and warns when the Fisher information vanishes at a
    quadrature node (numerically unstable by construction).
    """
    if name == "H0":
        return 0.0
    if name in ("H1", "H2"):
        info = node_information(ctx, mask)
        w = ctx.theta_weights / math.pi
        if name == "H1":
            return float(-(w @ info))
        bad = info <= 0
        if np.any(bad):
            warnings.warn(
                "H2 numerically unstable: Fisher information vanished at "
                f"{int(bad.sum())} quadrature node(s)",
                RuntimeWarning,
                stacklevel=2,
            )
            return math.inf
        return float(w @ (1.0 / info))
    if name == "H3":
        _, den, num = index_moments(ctx, mask)
        good = den > _DEN_FLOOR
        explained = np.sum(np.square(num[good]) / den[good])
        return float(prior_second_moment(ctx) - explained)
    raise ValueError(f"unknown heuristic {name!r}; expected one of {HEURISTICS}")


class _Scorer:
    """Counts heuristic evaluations and memoizes by mask pattern."""

    def __init__(self, name: str, ctx: LikelihoodContext, threads: int = 1):
        self.name = name
        self.ctx = ctx
        self.threads = max(1, int(threads))
        self.evaluations = 0
        self._memo: dict[tuple[int, ...], float] = {}

    def score(self, mask: BitMask) -> float:
        self.evaluations += 1
        hit = self._memo.get(mask.pattern)
        if hit is not None:
            return hit
        val = eval_heuristic(self.name, mask, self.ctx)
        self._memo[mask.pattern] = val
        return val

    def score_many(self, masks) -> list[float]:
        """Scores in input order; candidates are independent so they may
        be computed data-parallel."""
        if self.threads == 1 or len(masks) <= 1:
            return [self.score(m) for m in masks]
        self.evaluations += len(masks)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            vals = list(pool.map(lambda m: eval_heuristic(self.name, m, self.ctx), masks))
        for m, v in zip(masks, vals):
            self._memo[m.pattern] = v
        return vals


@dataclass
class GreedyResult:
    mask: BitMask                 # final mask q^(beta)
    trajectory: list[BitMask]     # q^(1)..q^(beta), nested by construction
    scores: list[float]           # h* after each iteration
    evaluations: int              # heuristic calls consumed


def greedy_mask(
    beta: int,
    heuristic: str,
    ctx: LikelihoodContext,
    threads: int = 1,
) -> GreedyResult:
    """Greedy one-bit-per-iteration mask selection.

    The running best score h* persists across iterations and candidates are
    accepted on <=; for monotone heuristics every iteration finds an
    acceptable candidate.  If numerical noise (or an unstable heuristic)
    leaves an iteration with no <= acceptance, the iteration-local best is
    taken so the popcount still reaches beta; ties again favor the largest
    position.

    Total evaluations equal sum_{i=0}^{beta-1} (bN - i)
    = -beta^2/2 + (bN + 1/2)*beta.
    """
    b = ctx.quantizer.bits
    n = ctx.n_window
    total = b * n
    if not 0 <= beta <= total:
        raise ValueError(f"beta {beta} out of range 0..{total}")
    scorer = _Scorer(heuristic, ctx, threads)
    current = BitMask((0,) * total, b)
    chosen: set[int] = set()
    best = math.inf
    trajectory: list[BitMask] = []
    scores: list[float] = []
    for _ in range(beta):
        positions = [j for j in range(total) if j not in chosen]
        candidates = [current.with_position(j) for j in positions]
        vals = scorer.score_many(candidates)
        winner = None
        local_best = math.inf
        local_winner = 0
        for i, v in enumerate(vals):
            if v <= best:
                best = v
                winner = i
            if v <= local_best:
                local_best = v
                local_winner = i
        if winner is None:
            winner = local_winner
            best = local_best
        current = candidates[winner]
        chosen.add(positions[winner])
        trajectory.append(current)
        scores.append(best)
    return GreedyResult(current, trajectory, scores, scorer.evaluations)


def brute_force_mask(
    beta: int,
    heuristic: str,
    ctx: LikelihoodContext,
    cap: int = BRUTE_FORCE_CAP,
    threads: int = 1,
) -> BitMask:
    """Exhaustive search over all popcount-beta masks.

    Ties resolve to the lexicographically smallest bit pattern.  Refuses
    when bN exceeds the cap; use greedy_mask for larger problems.
    """
    b = ctx.quantizer.bits
    n = ctx.n_window
    total = b * n
    if total > cap:
        raise ValueError(
            f"brute force over bN = {total} bits exceeds cap {cap}; "
            "use greedy_mask instead"
        )
    if not 0 <= beta <= total:
        raise ValueError(f"beta {beta} out of range 0..{total}")
    scorer = _Scorer(heuristic, ctx, threads)
    candidates = [
        BitMask.from_positions(pos, b, n) for pos in combinations(range(total), beta)
    ]
    vals = scorer.score_many(candidates)
    ranked = min(zip(vals, (m.pattern for m in candidates)), key=lambda t: (t[0], t[1]))
    return BitMask(ranked[1], b)
