"""Bayesian estimation of the current sample from a window of masked codes.

Conditioned on the clean sample x0 = A*cos(phi), the window of codes is
independent across samples given the phase branch phi = +/-arccos(x0/A)
(each branch has probability 1/2 under a uniform phase), and each sample's
code probability is a Gaussian integral between quantizer thresholds:

    p(y_n = k | phi) = Phi((T_{k+1} - mu_n)/sigma) - Phi((T_k - mu_n)/sigma),
    mu_n = A*cos(2*pi*F*n + phi),  n = -N+1..0.

Expectations over x0 use the substitution x0 = A*cos(theta), which turns
the arcsine prior into (1/pi) d(theta) on (0, pi); the integral is then
evaluated with composite Gauss-Legendre quadrature.  A LikelihoodContext
precomputes the per-node per-sample code probabilities (and their phase
derivatives) once; everything downstream reduces to products over window
slots and weighted sums over nodes.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .bitmask import BitMask, attainable_codes, encode_index
from .quantizer import UniformQuantizer
from .tone import ToneModel

# Cap on the number of array elements held by one expansion chunk; keeps the
# joint-window tensors at a few hundred MB even for 2**21 masked windows.
_CHUNK_ELEMS = 1 << 23

_INV_SQRT_2PI = 1.0 / math.sqrt(2 * math.pi)


class NumericalError(RuntimeError):
    """A numerically unrealizable request (e.g. conditioning on an index
    whose probability underflows to zero)."""


# -- Gaussian cell probabilities ---------------------------------------------


def cell_probability(code: int, mean: float, sigma: float, quantizer: UniformQuantizer) -> float:
    """Probability that mean + N(0, sigma^2) quantizes to the given code.

    Args:
        code: target code in 1..2**b.
        mean: noiseless input value.
        sigma: noise std, must be positive.
        quantizer: cell geometry provider.

    Returns:
        Gaussian mass of the cell, in [0, 1].
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not 1 <= code <= quantizer.n_codes:
        raise ValueError(f"code {code} out of range 1..{quantizer.n_codes}")
    edges = quantizer.thresholds
    lo = edges[code - 1]
    hi = edges[code]
    return float(ndtr((hi - mean) / sigma) - ndtr((lo - mean) / sigma))


def _cell_tables(quantizer, means, sigma):
    """Code probabilities and their derivative w.r.t. the mean.

    Args:
        means: array (..., ) of noiseless values.

    Returns:
        (P, D) of shape means.shape + (2**b,).  Rows of P sum to 1 up to
        telescoping roundoff.  D = dP/dmean.
    """
    z = (quantizer.thresholds - means[..., None]) / sigma  # (..., C+1)
    cdf = ndtr(z)
    P = np.diff(cdf, axis=-1)
    pdf = np.exp(-0.5 * np.square(z)) * _INV_SQRT_2PI
    D = (pdf[..., :-1] - pdf[..., 1:]) / sigma
    return P, D


def _composite_gauss(panels: int, order: int):
    """Composite Gauss-Legendre rule on (0, pi); weights sum to pi."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, math.pi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    theta = (mid[:, None] + half[:, None] * xg).ravel()
    w = (half[:, None] * wg).ravel()
    return theta, w


# -- precomputed likelihood state --------------------------------------------


class LikelihoodContext:
    """Quadrature grid plus per-node per-sample code probability tables.

    The context is immutable after construction and safe to share across
    threads; the per-slot masked tables are memoized because successive
    masks during optimization differ in a single slot.

    Args:
        quantizer: coarse observation quantizer.
        model: tone model; sigma must be positive.
        n_window: window length N (defaults to model.n_window).
        quad_nodes: requested number of theta nodes (rounded up to a
            multiple of the panel order; default 512, keep >= 256).
        support_eps: probabilities at or below this are treated as
            outside the support when summing Fisher information.
    """

    _PANEL_ORDER = 8

    def __init__(
        self,
        quantizer: UniformQuantizer,
        model: ToneModel,
        n_window: int | None = None,
        quad_nodes: int = 512,
        support_eps: float = 1e-15,
    ):
        if model.sigma <= 0:
            raise ValueError("LikelihoodContext requires sigma > 0")
        self.quantizer = quantizer
        self.model = model
        self.n_window = int(n_window if n_window is not None else model.n_window)
        if self.n_window < 1:
            raise ValueError(f"n_window must be >= 1, got {self.n_window}")
        self.support_eps = float(support_eps)

        panels = max(1, -(-int(quad_nodes) // self._PANEL_ORDER))
        theta, w = _composite_gauss(panels, self._PANEL_ORDER)
        self.quad_nodes = theta.size
        self.theta = theta
        self.theta_weights = w  # sums to pi
        self.sin_theta = np.sin(theta)

        A = model.amplitude
        self.x0_nodes = A * np.cos(theta)

        # Node-branch rows: rows [0:K] use phi = +theta, rows [K:2K] phi = -theta.
        # Row weight folds in the 1/pi prior factor and the 1/2 branch weight,
        # so p(d) = sum_r row_weight[r] * prod_s p(d_s | row r).
        K = self.quad_nodes
        phases = np.concatenate([theta, -theta])
        self.row_weight = np.tile(w / (2 * math.pi), 2)
        self.row_x0 = np.tile(self.x0_nodes, 2)

        offsets = np.arange(-(self.n_window - 1), 1, dtype=float)
        self.offsets = offsets
        args = 2 * math.pi * model.freq * offsets[None, :] + phases[:, None]
        means = A * np.cos(args)
        P, D = _cell_tables(quantizer, means, model.sigma)
        self.cell_prob = P                                # (2K, N, 2**b)
        self.cell_dphase = D * (-A * np.sin(args))[..., None]  # d/dphi
        self._n_rows = 2 * K
        self._slot_cache: dict[tuple[int, int], tuple] = {}

    # -- masked per-slot tables ---------------------------------------------

    def _masked_slot(self, slot: int, slot_mask: int):
        """Group the slot's code probabilities by masked value."""
        key = (slot, slot_mask)
        hit = self._slot_cache.get(key)
        if hit is not None:
            return hit
        b = self.quantizer.bits
        vals = attainable_codes(slot_mask, b)
        masked = 1 + ((np.arange(2**b)) & slot_mask)
        col = np.searchsorted(vals, masked)
        P = np.zeros((self._n_rows, vals.size))
        D = np.zeros((self._n_rows, vals.size))
        for c in range(2**b):
            P[:, col[c]] += self.cell_prob[:, slot, c]
            D[:, col[c]] += self.cell_dphase[:, slot, c]
        entry = (vals, P, D)
        self._slot_cache[key] = entry
        return entry

    def slot_tables(self, mask: BitMask):
        self._check_mask(mask)
        return [self._masked_slot(s, m) for s, m in enumerate(mask.sample_masks)]

    def _check_mask(self, mask: BitMask):
        if mask.n_window != self.n_window or mask.bits_per_sample != self.quantizer.bits:
            raise ValueError(
                f"mask geometry ({mask.bits_per_sample} x {mask.n_window}) does not "
                f"match context ({self.quantizer.bits} x {self.n_window})"
            )


def _expand_rows(tables, rows, with_derivative=False):
    """Joint-window probability products for a block of node-branch rows.

    Expands prod_s P_s over the slot-lexicographic enumeration of masked
    windows (slot 0 slowest).  With derivatives, carries the product rule
    alongside so dG is the derivative of G w.r.t. the phase.
    """
    rc = rows.stop - rows.start if isinstance(rows, slice) else len(rows)
    G = np.ones((rc, 1))
    dG = np.zeros((rc, 1)) if with_derivative else None
    for vals, P, D in tables:
        Pb = P[rows]
        if with_derivative:
            dG = (dG[:, :, None] * Pb[:, None, :] + G[:, :, None] * D[rows][:, None, :])
            dG = dG.reshape(rc, -1)
        G = (G[:, :, None] * Pb[:, None, :]).reshape(rc, -1)
    return (G, dG) if with_derivative else G


def _all_keys(mask: BitMask):
    """Ascending table keys of every attainable masked window."""
    b = mask.bits_per_sample
    n = mask.n_window
    keys = np.zeros(1, dtype=np.int64)
    for s, m in enumerate(mask.sample_masks):
        part = (attainable_codes(m, b) - 1) << (b * (n - 1 - s))
        keys = (keys[:, None] + part[None, :]).reshape(-1)
    return keys


def index_moments(ctx: LikelihoodContext, mask: BitMask, keys=None, want_num: bool = True):
    """Zeroth and first prior moments of every masked window index.

    For each index d this returns den[d] = p(d) (marginal probability under
    the arcsine prior) and num[d] = integral of x0 * p(d | x0) * prior; the
    MMSE estimate is num/den.

    Args:
        keys: optional int64 array of table keys to restrict to.  None
            enumerates all 2**beta attainable windows in ascending key order.
        want_num: skip the first-moment accumulation when False.

    Returns:
        (keys, den, num): num is None when want_num is False.
    """
    tables = ctx.slot_tables(mask)
    rw = ctx.row_weight
    rwx = rw * ctx.row_x0
    R = rw.size
    if keys is None:
        keys = _all_keys(mask)
        L = keys.size
        den = np.zeros(L)
        num = np.zeros(L) if want_num else None
        step = max(1, _CHUNK_ELEMS // max(L, 1))
        for r0 in range(0, R, step):
            rows = slice(r0, min(r0 + step, R))
            G = _expand_rows(tables, rows)
            den += rw[rows] @ G
            if want_num:
                num += rwx[rows] @ G
        return keys, den, num

    keys = np.asarray(keys, dtype=np.int64)
    b = mask.bits_per_sample
    n = mask.n_window
    G = np.ones((R, keys.size))
    for s, (vals, P, _) in enumerate(tables):
        d_s = 1 + ((keys >> (b * (n - 1 - s))) & (2**b - 1))
        col = np.searchsorted(vals, d_s)
        if np.any(col >= vals.size) or np.any(vals[np.minimum(col, vals.size - 1)] != d_s):
            raise ValueError("key contains a masked value not attainable under the mask")
        G *= P[:, col]
    den = rw @ G
    num = rwx @ G if want_num else None
    return keys, den, num


def node_information(ctx: LikelihoodContext, mask: BitMask) -> np.ndarray:
    """Fisher information I(x0 | mask) at every quadrature node.

    Uses dphi/dx0 = -/+ 1/(A*sin(theta)) per branch, so
    dp/dx0 = (dG_minus - dG_plus) / (2*A*sin(theta)).  Indices whose
    probability is at or below support_eps are excluded from the sum.
    """
    tables = ctx.slot_tables(mask)
    K = ctx.quad_nodes
    L = 2 ** mask.beta
    out = np.zeros(K)
    denom = 2.0 * ctx.model.amplitude * ctx.sin_theta
    step = max(1, _CHUNK_ELEMS // (4 * max(L, 1)))
    for k0 in range(0, K, step):
        k1 = min(k0 + step, K)
        idx = np.concatenate([np.arange(k0, k1), np.arange(K + k0, K + k1)])
        G, dG = _expand_rows(tables, idx, with_derivative=True)
        nc = k1 - k0
        p = 0.5 * (G[:nc] + G[nc:])
        dpdx = (dG[nc:] - dG[:nc]) / denom[k0:k1, None]
        good = p > ctx.support_eps
        contrib = np.where(good, np.square(dpdx) / np.where(good, p, 1.0), 0.0)
        out[k0:k1] = contrib.sum(axis=1)
    return out


# -- pointwise operations ----------------------------------------------------


def _tables_at_phases(ctx: LikelihoodContext, phases, mask: BitMask):
    """Per-slot masked probability tables (and phase derivatives) at
    arbitrary phases, shape (len(phases), n_attain) per slot."""
    model = ctx.model
    A = model.amplitude
    args = 2 * math.pi * model.freq * ctx.offsets[None, :] + np.asarray(phases)[:, None]
    means = A * np.cos(args)
    P, D = _cell_tables(ctx.quantizer, means, model.sigma)
    Dphi = D * (-A * np.sin(args))[..., None]
    b = ctx.quantizer.bits
    out = []
    for s, m in enumerate(mask.sample_masks):
        vals = attainable_codes(m, b)
        masked = 1 + ((np.arange(2**b)) & m)
        col = np.searchsorted(vals, masked)
        Ps = np.zeros((len(phases), vals.size))
        Ds = np.zeros((len(phases), vals.size))
        for c in range(2**b):
            Ps[:, col[c]] += P[:, s, c]
            Ds[:, col[c]] += Dphi[:, s, c]
        out.append((vals, Ps, Ds))
    return out


def _check_window(d, mask: BitMask):
    d = np.asarray(d, dtype=np.int64)
    if d.shape != (mask.n_window,):
        raise ValueError(f"window shape {d.shape} does not match N = {mask.n_window}")
    m = np.asarray(mask.sample_masks, dtype=np.int64)
    if np.any(d < 1) or np.any(((d - 1) & ~m) != 0):
        raise ValueError(f"window {d.tolist()} is not attainable under the mask")
    return d


def window_likelihood(d, mask: BitMask, x0: float, ctx: LikelihoodContext) -> float:
    """Conditional probability p(d | x0) of a masked window.

    Averages the two phase branches: p = (g(+theta) + g(-theta))/2 with
    g(phi) the product of per-slot masked code probabilities.
    """
    d = _check_window(d, mask)
    ctx._check_mask(mask)
    ratio = x0 / ctx.model.amplitude
    if abs(ratio) > 1:
        raise ValueError(f"|x0| = {abs(x0)} exceeds amplitude {ctx.model.amplitude}")
    theta = math.acos(ratio)
    tables = _tables_at_phases(ctx, [theta, -theta], mask)
    g = np.ones(2)
    for s, (vals, P, _) in enumerate(tables):
        g *= P[:, np.searchsorted(vals, d[s])]
    return float(0.5 * (g[0] + g[1]))


def mmse_estimate(d, mask: BitMask, ctx: LikelihoodContext) -> float:
    """Posterior mean E[x0 | d] under the arcsine prior.

    Raises:
        NumericalError: when p(d) underflows (unrealizable index).
    """
    d = _check_window(d, mask)
    key = encode_index(d, mask)
    _, den, num = index_moments(ctx, mask, keys=np.asarray([key]))
    if den[0] < 1e-300:
        raise NumericalError(
            f"index {np.asarray(d).tolist()} has vanishing probability; "
            "cannot condition on it"
        )
    return float(num[0] / den[0])


def fisher_information(x0: float, mask: BitMask, ctx: LikelihoodContext) -> float:
    """Fisher information of the masked window about x0, at interior x0.

    Sums (dp/dx0)^2 / p over the support (p > support_eps).  The endpoint
    |x0| = A is excluded: the phase-to-x0 Jacobian diverges there.
    """
    ctx._check_mask(mask)
    A = ctx.model.amplitude
    ratio = x0 / A
    if abs(ratio) >= 1:
        raise ValueError(f"fisher_information requires |x0| < A, got x0 = {x0}")
    theta = math.acos(ratio)
    tables = _tables_at_phases(ctx, [theta, -theta], mask)
    G, dG = _expand_rows(tables, slice(0, 2), with_derivative=True)
    p = 0.5 * (G[0] + G[1])
    dpdx = (dG[1] - dG[0]) / (2.0 * A * math.sin(theta))
    good = p > ctx.support_eps
    return float(np.sum(np.square(dpdx[good]) / p[good]))


def prior_second_moment(ctx: LikelihoodContext) -> float:
    """E[x0^2] under the quadrature-discretized prior (analytically A^2/2)."""
    return float(ctx.row_weight @ np.square(ctx.row_x0))
