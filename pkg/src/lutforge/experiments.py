"""Figure-level experiment drivers behind the command-line interface.

Every driver is a pure function of (config, seeds): artifacts are
byte-identical across repeat runs.  Randomness is namespaced through
SeedSequence spawn keys -- (0, trial) feeds the signal generator,
(1, trial) feeds runtime table randomness, (2,) derives design-time
(build) seeds -- so changing the trial count never shifts earlier streams.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import estimator as est
from .bitmask import BitMask
from .config import ConfigError, ExperimentConfig, write_manifest
from .dither import (DitherSpec, LutTable, build_lut, export_hex,
                     lookup_estimates, lookup_stream, read_lut, sample_dither,
                     write_lut)
from .hpi import (_rank, build_hpi_exact, build_hpi_montecarlo,
                  expected_coverage, write_hpi)
from .mask_opt import GreedyResult, brute_force_mask, greedy_mask
from .metrics import (MetricReport, memory_bits, mse_db, pareto_front,
                      periodogram, sfdr_dbc, write_metric_csv, write_psd_csv)
from .quantizer import UniformQuantizer
from .tone import ToneModel, generate_sequence


def _signal_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, trial)))


def _runtime_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, trial)))


def _design_seed(seed: int) -> int:
    """Independent integer seed for design-time (build) randomness."""
    return int(np.random.SeedSequence(seed, spawn_key=(2,)).generate_state(1)[0])


def _model(cfg: ExperimentConfig) -> ToneModel:
    return ToneModel(amplitude=cfg.amplitude, freq=cfg.freq, sigma=cfg.sigma,
                     n_window=cfg.n_window)


def _context(cfg: ExperimentConfig) -> est.LikelihoodContext:
    return est.LikelihoodContext(UniformQuantizer(cfg.bits), _model(cfg),
                                 quad_nodes=cfg.quad_nodes)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- mask design ---------------------------------------------------------------


def design_mask(cfg: ExperimentConfig, ctx: est.LikelihoodContext):
    """Resolve the bit-mask for a config: explicit string, greedy, or brute.

    Returns (mask, greedy_result_or_None).
    """
    if cfg.mask is not None:
        return BitMask.from_string(cfg.mask, cfg.bits), None
    beta = cfg.beta_value()
    if cfg.mask_method == "brute":
        return brute_force_mask(beta, cfg.heuristic, ctx, threads=cfg.threads), None
    result = greedy_mask(beta, cfg.heuristic, ctx, threads=cfg.threads)
    return result.mask, result


def _table_moments(ctx, mask):
    """Index keys with probabilities and posterior means, zero-mass rows dropped."""
    keys, den, num = est.index_moments(ctx, mask)
    ok = den > 0.0
    return keys[ok], den[ok], num[ok] / den[ok]


def _hpi_select(keys, probs, epsilon):
    """Shortest probability-ranked prefix reaching `epsilon` total mass.

    Same ordering as the exact HPI builder; returns (selector, coverage).
    """
    _, _, order = _rank(keys, probs)
    cum = np.cumsum(probs[order])
    if epsilon >= 1.0 or epsilon > cum[-1]:
        count = keys.size
    else:
        count = int(np.searchsorted(cum, epsilon) + 1)
    sel = np.sort(order[:count])
    return sel, float(cum[count - 1])


def _assemble_lut(cfg: ExperimentConfig, ctx=None, mask=None, moments=None):
    """Design pipeline shared by build-lut / evaluate / sweeps."""
    if ctx is None:
        ctx = _context(cfg)
    if mask is None:
        mask, _ = design_mask(cfg, ctx)
    if moments is None:
        moments = _table_moments(ctx, mask)
    keys, probs, xhat = moments
    sel, coverage = _hpi_select(keys, probs, cfg.epsilon)
    spec = DitherSpec(alpha=cfg.alpha, architecture=cfg.architecture,
                      bits=cfg.bits, tables=cfg.tables, rho=cfg.rho)
    lut = build_lut((keys[sel], xhat[sel]), spec, mask,
                    seed=_design_seed(cfg.seed), epsilon=cfg.epsilon)
    return lut, coverage


# -- per-trial evaluation ------------------------------------------------------


@dataclass
class TrialResult:
    mse_db: float
    sfdr_dbc: float
    raw_mse_db: float
    raw_sfdr_dbc: float
    fallback_rate: float
    est_mse_db: float | None = None      # post tables: high-precision stream
    est_sfdr_dbc: float | None = None


def _evaluate_trial(cfg: ExperimentConfig, lut: LutTable, trial: int) -> TrialResult:
    model = _model(cfg)
    qz = UniformQuantizer(cfg.bits)
    clean, _noisy, codes = generate_sequence(model, qz, cfg.samples,
                                             _signal_rng(cfg.seed, trial))
    win = sliding_window_view(codes, cfg.n_window)
    ref = clean[cfg.n_window - 1:]
    raw = qz.reconstruct(codes[cfg.n_window - 1:])
    out, misses = lookup_stream(lut, win, _runtime_rng(cfg.seed, trial))
    rec = qz.reconstruct(out)
    result = TrialResult(
        mse_db=mse_db(ref, rec),
        sfdr_dbc=sfdr_dbc(rec, cfg.freq, cfg.f_offset),
        raw_mse_db=mse_db(ref, raw),
        raw_sfdr_dbc=sfdr_dbc(raw, cfg.freq, cfg.f_offset),
        fallback_rate=misses / win.shape[0],
    )
    if lut.spec.architecture == "post":
        est_stream = lookup_estimates(lut, win)
        result.est_mse_db = mse_db(ref, est_stream)
        result.est_sfdr_dbc = sfdr_dbc(est_stream, cfg.freq, cfg.f_offset)
    return result


def _stats(values) -> dict:
    a = np.asarray(values, dtype=float)
    return {"mean": float(a.mean()), "min": float(a.min()), "max": float(a.max())}


# -- commands ------------------------------------------------------------------


def run_simulate(cfg: ExperimentConfig) -> dict:
    """Baseline tone study: quantization with and without pre-quantization dither.

    Writes PSD CSVs for the first trial (input / undithered / dithered) and a
    metric row per trial and variant.
    """
    out = _out_dir(cfg)
    model = _model(cfg)
    qz = UniformQuantizer(cfg.bits)
    reports, deltas, gains = [], [], []
    for trial in range(cfg.trials):
        clean, noisy, codes = generate_sequence(model, qz, cfg.samples,
                                                _signal_rng(cfg.seed, trial))
        rng = _runtime_rng(cfg.seed, trial)
        v = sample_dither(1.0, qz.step, rng, size=noisy.shape)
        codes_d = qz.quantize(noisy + v, rng)
        rec, rec_d = qz.reconstruct(codes), qz.reconstruct(codes_d)
        rows = [("input", noisy), ("undithered", rec), ("dithered", rec_d)]
        for name, sig in rows:
            reports.append(MetricReport(
                mse_db=mse_db(clean, sig),
                sfdr_dbc=sfdr_dbc(sig, cfg.freq, cfg.f_offset),
                memory_bits=0, alpha=cfg.alpha if name == "dithered" else 0.0,
                n_window=cfg.n_window, seed=cfg.seed,
                extras={"variant": name, "trial": trial}))
            if trial == 0:
                freqs, power = periodogram(sig)
                write_psd_csv(freqs, power, out / f"psd_{name}.csv")
        und, dit = reports[-2], reports[-1]
        deltas.append(dit.mse_db - und.mse_db)
        gains.append(dit.sfdr_dbc - und.sfdr_dbc)
    write_metric_csv(reports, out / "metrics.csv")
    write_manifest(cfg, "simulate", out)
    return {"mse_delta_db": _stats(deltas), "sfdr_gain_dbc": _stats(gains),
            "reports": reports}


def run_design_mask(cfg: ExperimentConfig) -> dict:
    """Heuristic mask search; writes the mask and the greedy trace."""
    out = _out_dir(cfg)
    ctx = _context(cfg)
    mask, result = design_mask(cfg, ctx)
    lines = [
        f"bits={cfg.bits}",
        f"n_window={cfg.n_window}",
        f"heuristic={cfg.heuristic}",
        f"method={'explicit' if cfg.mask else cfg.mask_method}",
        f"beta={mask.beta}",
        f"mask={mask.to_string()}",
    ]
    (out / "mask.txt").write_text("\n".join(lines) + "\n")
    if result is not None:
        rows = ["t,score,mask"]
        for t, (m, s) in enumerate(zip(result.trajectory, result.scores), 1):
            rows.append(f"{t},{s:.12g},{m.to_string()}")
        (out / "trace.csv").write_text("\n".join(rows) + "\n")
    write_manifest(cfg, "design-mask", out,
                   evaluations=result.evaluations if result else 0)
    return {"mask": mask, "result": result}


def read_mask_file(path) -> BitMask:
    header = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            key, val = line.split("=", 1)
            header[key.strip()] = val.strip()
    try:
        return BitMask.from_string(header["mask"], int(header["bits"]))
    except KeyError as exc:
        raise ValueError(f"mask file {path} is missing a {exc} line") from exc


def run_build_hpi(cfg: ExperimentConfig) -> dict:
    """High-probability index set construction plus a coverage report."""
    out = _out_dir(cfg)
    ctx = _context(cfg)
    mask, _ = design_mask(cfg, ctx)
    if cfg.hpi_method == "exact":
        hpi = build_hpi_exact(cfg.epsilon, mask, ctx)
    else:
        hpi = build_hpi_montecarlo(cfg.draws, mask, _model(cfg),
                                   seed=_design_seed(cfg.seed), ctx=ctx)
    write_hpi(hpi, out / "hpi.txt")
    report = [
        f"entries={len(hpi)}",
        f"alphabet=2^{mask.beta}",
        f"ratio={len(hpi) / 2.0 ** mask.beta:.12g}",
        f"coverage={hpi.coverage:.12g}",
        f"prob_mode={hpi.prob_mode}",
    ]
    if cfg.hpi_method == "mc" and hpi.prob_mode == "exact":
        keys, den, _ = _table_moments(ctx, mask)
        report.append(f"predicted_coverage={expected_coverage(cfg.draws, den):.12g}")
    (out / "coverage.txt").write_text("\n".join(report) + "\n")
    write_manifest(cfg, "build-hpi", out, entries=len(hpi))
    return {"hpi": hpi, "mask": mask}


def run_build_lut(cfg: ExperimentConfig) -> dict:
    out = _out_dir(cfg)
    lut, coverage = _assemble_lut(cfg)
    write_lut(lut, out / "lut.txt")
    export_hex(lut, out / "lut.hex")
    write_manifest(cfg, "build-lut", out, entries=lut.entries,
                   coverage=f"{coverage:.12g}", memory_bits=lut.memory_bits)
    return {"lut": lut, "coverage": coverage}


def run_evaluate(cfg: ExperimentConfig) -> dict:
    """Correction quality of a table (from `lut=` or built from the config)."""
    out = _out_dir(cfg)
    if cfg.lut is not None:
        lut = read_lut(cfg.lut)
    else:
        lut, _ = _assemble_lut(cfg)
    trials = [_evaluate_trial(cfg, lut, t) for t in range(cfg.trials)]
    reports = []
    for t, r in enumerate(trials):
        extras = {"trial": t, "raw_mse_db": r.raw_mse_db,
                  "raw_sfdr_dbc": r.raw_sfdr_dbc,
                  "sfdr_gain_dbc": r.sfdr_dbc - r.raw_sfdr_dbc,
                  "fallback_rate": r.fallback_rate}
        if r.est_mse_db is not None:
            extras["est_mse_db"] = r.est_mse_db
            extras["est_sfdr_dbc"] = r.est_sfdr_dbc
        reports.append(MetricReport(
            mse_db=r.mse_db, sfdr_dbc=r.sfdr_dbc, memory_bits=lut.memory_bits,
            beta=lut.mask.beta, epsilon=lut.epsilon, rho=lut.spec.rho,
            alpha=lut.spec.alpha, architecture=lut.spec.architecture,
            n_window=cfg.n_window, seed=cfg.seed, extras=extras))
    write_metric_csv(reports, out / "metrics.csv")
    write_manifest(cfg, "evaluate", out, entries=lut.entries)
    return {
        "lut": lut,
        "trials": trials,
        "mse_db": _stats([r.mse_db for r in trials]),
        "sfdr_gain_dbc": _stats([r.sfdr_dbc - r.raw_sfdr_dbc for r in trials]),
    }


def run_sweep_alpha(cfg: ExperimentConfig) -> dict:
    """Dither-amplitude sweep: repeated trials per grid point, envelope stats."""
    out = _out_dir(cfg)
    ctx = _context(cfg)
    mask, _ = design_mask(cfg, ctx)
    moments = _table_moments(ctx, mask)
    rows = []
    table = {}
    for alpha in cfg.alpha_grid:
        acfg = dataclasses.replace(cfg, alpha=alpha)
        lut, coverage = _assemble_lut(acfg, ctx=ctx, mask=mask, moments=moments)
        trials = [_evaluate_trial(acfg, lut, t) for t in range(cfg.trials)]
        entry = {
            "alpha": alpha,
            "mse_db": _stats([r.mse_db for r in trials]),
            "sfdr_dbc": _stats([r.sfdr_dbc for r in trials]),
            "sfdr_gain_dbc": _stats([r.sfdr_dbc - r.raw_sfdr_dbc for r in trials]),
            "fallback_rate": _stats([r.fallback_rate for r in trials]),
        }
        if trials[0].est_sfdr_dbc is not None:
            entry["est_sfdr_dbc"] = _stats([r.est_sfdr_dbc for r in trials])
        table[alpha] = entry
        row = [f"{alpha:.12g}", str(cfg.trials)]
        for key in ("mse_db", "sfdr_dbc", "sfdr_gain_dbc"):
            s = entry[key]
            row += [f"{s['mean']:.12g}", f"{s['min']:.12g}", f"{s['max']:.12g}"]
        row.append(f"{entry['fallback_rate']['mean']:.12g}")
        rows.append(",".join(row))
    header = ("alpha,trials,"
              "mse_db_mean,mse_db_min,mse_db_max,"
              "sfdr_dbc_mean,sfdr_dbc_min,sfdr_dbc_max,"
              "sfdr_gain_dbc_mean,sfdr_gain_dbc_min,sfdr_gain_dbc_max,"
              "fallback_rate_mean")
    (out / "sweep.csv").write_text("\n".join([header] + rows) + "\n")
    write_manifest(cfg, "sweep-alpha", out, mask=mask.to_string(),
                   randomized="phase+noise per trial")
    return {"mask": mask, "table": table}


def _pareto_cell(cfg, mask, moments, signals, beta, eps, rho):
    """Evaluate one (beta, epsilon, rho) grid point over the common signals."""
    keys, probs, xhat = moments
    sel, coverage = _hpi_select(keys, probs, eps)
    spec = DitherSpec(alpha=cfg.alpha, architecture="post", bits=cfg.bits, rho=rho)
    lut = build_lut((keys[sel], xhat[sel]), spec, mask,
                    seed=_design_seed(cfg.seed), epsilon=eps)
    mses, sfdrs, falls = [], [], []
    for trial, (ref, win, _raw_mse, raw_sfdr) in enumerate(signals):
        est_stream = lookup_estimates(lut, win)
        mses.append(mse_db(ref, est_stream))
        out_codes, misses = lookup_stream(lut, win, _runtime_rng(cfg.seed, trial))
        rec = UniformQuantizer(cfg.bits).reconstruct(out_codes)
        sfdrs.append(sfdr_dbc(rec, cfg.freq, cfg.f_offset))
        falls.append(misses / win.shape[0])
    mem = memory_bits(rho, lut.entries, "post")
    return {
        "beta": beta, "epsilon": eps, "rho": rho, "entries": lut.entries,
        "coverage": coverage, "memory_bits": mem,
        "mse_db": float(np.mean(mses)),
        "sfdr_dbc": float(np.mean(sfdrs)),
        "fallback_rate": float(np.mean(falls)),
    }


def run_pareto(cfg: ExperimentConfig) -> dict:
    """Memory/performance trade-off grid over (beta, epsilon, rho) post tables.

    One greedy run at the largest beta supplies the whole mask trajectory.
    All cells see the same per-trial signals (paired comparison), and cells
    are distributed over a worker pool; rows are sorted before writing so
    aggregation order cannot leak into the artifacts.
    """
    out = _out_dir(cfg)
    ctx = _context(cfg)
    beta_grid = sorted(set(cfg.beta_grid))
    if max(beta_grid) > cfg.bits * cfg.n_window:
        raise ConfigError(f"beta_grid exceeds bN={cfg.bits * cfg.n_window}")
    result = greedy_mask(max(beta_grid), cfg.heuristic, ctx, threads=cfg.threads)
    masks = {b: result.trajectory[b - 1] for b in beta_grid}
    moments = {b: _table_moments(ctx, masks[b]) for b in beta_grid}

    model = _model(cfg)
    qz = UniformQuantizer(cfg.bits)
    signals = []
    raw_mses, raw_sfdrs = [], []
    for trial in range(cfg.trials):
        clean, _noisy, codes = generate_sequence(model, qz, cfg.samples,
                                                 _signal_rng(cfg.seed, trial))
        win = sliding_window_view(codes, cfg.n_window)
        ref = clean[cfg.n_window - 1:]
        raw = qz.reconstruct(codes[cfg.n_window - 1:])
        rm, rs = mse_db(ref, raw), sfdr_dbc(raw, cfg.freq, cfg.f_offset)
        signals.append((ref, win, rm, rs))
        raw_mses.append(rm)
        raw_sfdrs.append(rs)
    raw_mse, raw_sfdr = float(np.mean(raw_mses)), float(np.mean(raw_sfdrs))

    cells = [(b, e, r) for b in beta_grid
             for e in sorted(set(cfg.eps_grid))
             for r in sorted(set(cfg.rho_grid))]

    def job(cell):
        b, e, r = cell
        return _pareto_cell(cfg, masks[b], moments[b], signals, b, e, r)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(job, cells))
    else:
        rows = [job(c) for c in cells]
    rows.sort(key=lambda r: (r["memory_bits"], r["beta"], r["epsilon"], r["rho"]))
    for r in rows:
        r["mse_improvement_db"] = raw_mse - r["mse_db"]
        r["sfdr_gain_dbc"] = r["sfdr_dbc"] - raw_sfdr

    cols = ["beta", "epsilon", "rho", "entries", "coverage", "memory_bits",
            "mse_db", "mse_improvement_db", "sfdr_dbc", "sfdr_gain_dbc",
            "fallback_rate"]

    def fmt(v):
        return f"{v:.12g}" if isinstance(v, float) else str(v)

    grid_lines = [",".join(cols)]
    grid_lines += [",".join(fmt(r[c]) for c in cols) for r in rows]
    (out / "grid.csv").write_text("\n".join(grid_lines) + "\n")

    fronts = {}
    front_lines = ["objective," + ",".join(cols)]
    for objective, key in (("mse_improvement_db", "mse_improvement_db"),
                           ("sfdr_gain_dbc", "sfdr_gain_dbc")):
        pts = [(r["memory_bits"], r[key]) for r in rows]
        front_pts = set(pareto_front(pts, higher_is_better=True))
        members = [r for r in rows if (r["memory_bits"], r[key]) in front_pts]
        fronts[objective] = members
        front_lines += [objective + "," + ",".join(fmt(r[c]) for c in cols)
                        for r in members]
    (out / "front.csv").write_text("\n".join(front_lines) + "\n")
    write_manifest(cfg, "pareto", out, raw_mse_db=f"{raw_mse:.12g}",
                   raw_sfdr_dbc=f"{raw_sfdr:.12g}")
    return {"rows": rows, "fronts": fronts,
            "raw_mse_db": raw_mse, "raw_sfdr_dbc": raw_sfdr}


def run_export_hex(cfg: ExperimentConfig) -> dict:
    out = _out_dir(cfg)
    if cfg.lut is None:
        raise ConfigError("export-hex needs lut=PATH in the config")
    lut = read_lut(cfg.lut)
    path = out / "lut.hex"
    export_hex(lut, path)
    write_manifest(cfg, "export-hex", out, entries=lut.entries)
    return {"lut": lut, "path": path}
