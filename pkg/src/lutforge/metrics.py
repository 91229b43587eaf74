"""Reconstruction-error and spectral metrics, memory accounting, Pareto sweep.

The periodogram is the plain rectangular-window estimate
|sum_n x_n e^{-j2pi f n}|^2 on the FFT grid f = k/len; an off-grid tone
therefore leaks into sidelobes, which is why SFDR takes a carrier band
[f_c - f_o, f_c + f_o] rather than a single bin.  The spur search runs over
(0, 0.5] with the DC bin excluded (a mean offset is not a spur).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

DB_FLOOR = -300.0  # reported instead of -inf for exactly-zero power
SFDR_CEIL = 300.0  # reported when no spur energy is measurable

ARCHITECTURES = ("intra", "inter", "post")


def mse_db(reference, test) -> float:
    """Mean squared error in dB: 10*log10(mean((reference - test)^2)).

    Exact matches report the -300 dB floor rather than -inf.
    """
    r = np.asarray(reference, dtype=float)
    t = np.asarray(test, dtype=float)
    if r.shape != t.shape or r.size < 1:
        raise ValueError(f"shape mismatch {r.shape} vs {t.shape}")
    mse = float(np.mean(np.square(r - t)))
    if mse <= 0.0:
        return DB_FLOOR
    return max(10.0 * np.log10(mse), DB_FLOOR)


def periodogram(x):
    """Rectangular-window power spectrum on the full FFT grid.

    Returns:
        (freqs, power): f = k/len for k = 0..len-1 and |X(f)|^2 with no
        normalization, so a unit tone centered on a bin peaks at (len/2)^2.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 16:
        raise ValueError("periodogram needs a 1-D signal of length >= 16")
    spectrum = np.fft.fft(x)
    freqs = np.arange(x.size) / x.size
    return freqs, np.square(np.abs(spectrum))


def sfdr_dbc(x, carrier_freq: float, offset: float = 1e-3) -> float:
    """Spurious-free dynamic range of a tone at carrier_freq, in dBc.

    The carrier power is the largest bin inside [carrier - offset,
    carrier + offset] (robust to leakage of an off-grid tone); the spur is
    the largest bin elsewhere in (0, 0.5].
    """
    if not 0 < carrier_freq < 0.5:
        raise ValueError(f"carrier_freq must lie in (0, 0.5), got {carrier_freq}")
    if offset < 0:
        raise ValueError(f"offset must be >= 0, got {offset}")
    freqs, power = periodogram(x)
    half = (freqs > 0) & (freqs <= 0.5)
    in_band = half & (np.abs(freqs - carrier_freq) <= offset)
    out_band = half & ~in_band
    if not np.any(out_band):
        raise ValueError("exclusion band covers the entire spectrum; shrink offset")
    if np.any(in_band):
        carrier = float(power[in_band].max())
    else:
        carrier = float(power[round(carrier_freq * x.size) % x.size])
    spur = float(power[out_band].max())
    if spur <= 0.0:
        return SFDR_CEIL
    if carrier <= 0.0:
        return -SFDR_CEIL
    return min(10.0 * np.log10(carrier / spur), SFDR_CEIL)


def memory_bits(entry_bits: int, entries: int, architecture: str, tables: int = 1) -> int:
    """Storage cost of a table: b*L (intra), Xi*b*L (inter), rho*L (post)."""
    if entry_bits < 1 or entries < 1 or tables < 1:
        raise ValueError("memory_bits arguments must be positive")
    if architecture not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {architecture!r}")
    if architecture == "inter":
        return tables * entry_bits * entries
    return entry_bits * entries


def pareto_front(points, higher_is_better: bool):
    """Non-dominated subset of (memory_bits, metric) points.

    A point dominates another when it is no worse in both coordinates and
    strictly better in at least one.  Exact duplicates of a kept point are
    all kept.  The result is sorted by (memory, metric), so it does not
    depend on input order.
    """
    pts = list(points)
    if not pts:
        return []
    sign = 1.0 if higher_is_better else -1.0
    ranked = sorted(pts, key=lambda p: (p[0], -sign * p[1]))
    kept = []
    best = -np.inf
    i = 0
    while i < len(ranked):
        # group of equal memory
        j = i
        group_best = -np.inf
        while j < len(ranked) and ranked[j][0] == ranked[i][0]:
            group_best = max(group_best, sign * ranked[j][1])
            j += 1
        if group_best > best:
            kept.extend(p for p in ranked[i:j] if sign * p[1] == group_best)
            best = group_best
        i = j
    return sorted(kept, key=lambda p: (p[0], p[1]))


@dataclass
class MetricReport:
    mse_db: float
    sfdr_dbc: float
    memory_bits: int
    beta: int | None = None
    epsilon: float | None = None
    rho: int | None = None
    alpha: float | None = None
    architecture: str | None = None
    n_window: int | None = None
    seed: int | None = None
    extras: dict = field(default_factory=dict)  # free-form extra columns

    _COLUMNS = (
        "mse_db", "sfdr_dbc", "memory_bits", "beta", "epsilon", "rho",
        "alpha", "architecture", "n_window", "seed",
    )

    def as_row(self) -> dict:
        row = {}
        for name in self._COLUMNS:
            row[name] = _fmt(getattr(self, name))
        for k, v in self.extras.items():
            row[k] = _fmt(v)
        return row


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def write_metric_csv(reports, path) -> None:
    """One row per configuration; extras columns appended after the fixed set."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to write")
    fields = list(MetricReport._COLUMNS)
    for r in reports:
        for k in r.extras:
            if k not in fields:
                fields.append(k)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, restval="")
        writer.writeheader()
        for r in reports:
            writer.writerow(r.as_row())


def write_psd_csv(freqs, power, path) -> None:
    """PSD rows as frequency,power_db with the usual -300 dB floor."""
    freqs = np.asarray(freqs)
    power = np.asarray(power, dtype=float)
    db = np.full(power.shape, DB_FLOOR)
    pos = power > 0
    db[pos] = np.maximum(10.0 * np.log10(power[pos]), DB_FLOOR)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency", "power_db"])
        for f, p in zip(freqs, db):
            writer.writerow([f"{f:.12g}", f"{p:.12g}"])
