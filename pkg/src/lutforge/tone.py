"""Noisy sinusoidal test signal and the induced prior on the current sample.

The stimulus is x_n = A*cos(2*pi*F*n + phi) + w_n with w_n ~ N(0, sigma^2)
i.i.d.  With phase drawn uniformly, the marginal of the clean sample
x0 = A*cos(phi) is the arcsine density on (-A, A), and each x0 in the open
interval is reached by exactly two phases +/-arccos(x0/A), each carrying
probability 1/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .quantizer import UniformQuantizer


@dataclass(frozen=True)
class ToneModel:
    amplitude: float = 0.875     # A, peak of the clean tone
    freq: float = math.pi / 10   # F, cycles per sample in (0, 0.5)
    sigma: float = 0.04          # input-referred Gaussian noise std
    phase: float | None = None   # None: draw uniformly per run
    n_window: int = 10           # window length N used by the estimator

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if not 0 < self.freq < 0.5:
            raise ValueError(f"freq must lie in (0, 0.5), got {self.freq}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.n_window < 1:
            raise ValueError(f"n_window must be >= 1, got {self.n_window}")
        approx = Fraction(self.freq).limit_denominator(100)
        if abs(self.freq - float(approx)) < 1e-9:
            warnings.warn(
                f"freq {self.freq} is (nearly) the rational {approx}; the tone "
                "revisits few phases and phase-average statistics degrade",
                RuntimeWarning,
                stacklevel=2,
            )


def sample_tone(model: ToneModel, n, phase: float) -> np.ndarray:
    """Clean tone values A*cos(2*pi*F*n + phase) at integer times n."""
    n = np.asarray(n, dtype=float)
    return model.amplitude * np.cos(2 * math.pi * model.freq * n + phase)


def generate_sequence(
    model: ToneModel,
    quantizer: UniformQuantizer,
    length: int,
    rng: np.random.Generator,
):
    """Draw one run of the stimulus and its coarse observation.

    Draw order is fixed (phase, then noise, then threshold tie-breaks) so a
    seeded rng reproduces the run bit for bit.

    Returns:
        (clean, noisy, codes): float arrays of the clean tone and the
        noise-corrupted input, plus the int64 quantizer codes.
    """
    if model.phase is None:
        phase = float(rng.uniform(0.0, 2 * math.pi))
    else:
        phase = model.phase
    clean = sample_tone(model, np.arange(length), phase)
    noisy = clean + model.sigma * rng.standard_normal(length)
    codes = quantizer.quantize(noisy, rng)
    return clean, noisy, codes


def prior_x0(x0, amplitude: float):
    """Arcsine density 1/(pi*sqrt(A^2 - x0^2)) of the clean current sample.

    Returns 0 outside [-A, A] and +inf at the endpoints (integrable
    singularity).
    """
    x = np.asarray(x0, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < amplitude
    with np.errstate(divide="ignore"):
        out[inside] = 1.0 / (np.pi * np.sqrt(amplitude**2 - x[inside] ** 2))
    out[np.abs(x) == amplitude] = np.inf
    if x.ndim == 0:
        return float(out)
    return out


def phase_branches(x0: float, amplitude: float) -> tuple[float, float]:
    """The two phases consistent with a clean sample value x0.

    Solving A*cos(phi) = x0 on (-pi, pi] gives phi = +/-arccos(x0/A); under a
    uniform phase prior each branch has probability 1/2.

    Raises:
        ValueError: if |x0| > A (no real phase exists).
    """
    ratio = x0 / amplitude
    if abs(ratio) > 1:
        raise ValueError(f"|x0| = {abs(x0)} exceeds amplitude {amplitude}")
    theta = math.acos(ratio)
    return theta, -theta
