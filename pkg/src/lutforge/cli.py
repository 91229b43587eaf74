"""Command-line entry point.

    lutforge <command> [--config PATH] [--seed N] [--out DIR]
                       [--trials N] [--threads N]

Commands: simulate, design-mask, build-hpi, build-lut, evaluate,
sweep-alpha, pareto, export-hex.  All experiment settings live in a
plain key=value config file; the flags override the file.  Exit codes:
0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .estimator import NumericalError
from . import experiments


_COMMANDS = {
    "simulate": experiments.run_simulate,
    "design-mask": experiments.run_design_mask,
    "build-hpi": experiments.run_build_hpi,
    "build-lut": experiments.run_build_lut,
    "evaluate": experiments.run_evaluate,
    "sweep-alpha": experiments.run_sweep_alpha,
    "pareto": experiments.run_pareto,
    "export-hex": experiments.run_export_hex,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lutforge",
        description="Design and evaluate dithered correction tables "
                    "for coarse quantizer outputs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", metavar="PATH",
                       help="key=value config file")
        p.add_argument("--seed", type=int, metavar="U64",
                       help="master seed (overrides the config)")
        p.add_argument("--out", metavar="DIR",
                       help="output directory (overrides the config)")
        p.add_argument("--trials", type=int, metavar="N",
                       help="independent trials per grid point")
        p.add_argument("--threads", type=int, metavar="N",
                       help="worker threads for grid evaluation")
    return parser


def _summarize(command: str, result: dict) -> str:
    if command == "simulate":
        d, g = result["mse_delta_db"], result["sfdr_gain_dbc"]
        return (f"dither MSE delta {d['mean']:+.2f} dB, "
                f"SFDR gain {g['mean']:+.2f} dBc (mean of trials)")
    if command == "design-mask":
        mask = result["mask"]
        return f"mask {mask.to_string()} (beta={mask.beta})"
    if command == "build-hpi":
        hpi = result["hpi"]
        return f"{len(hpi)} entries, coverage {hpi.coverage:.4f}"
    if command == "build-lut":
        lut = result["lut"]
        return (f"{lut.entries} entries, {lut.memory_bits} bits "
                f"({lut.spec.architecture})")
    if command == "evaluate":
        m, g = result["mse_db"], result["sfdr_gain_dbc"]
        return (f"MSE {m['mean']:.2f} dB, SFDR gain {g['mean']:+.2f} dBc "
                f"(mean of trials)")
    if command == "sweep-alpha":
        best = max(result["table"].values(),
                   key=lambda e: e["sfdr_gain_dbc"]["mean"])
        return (f"best SFDR gain {best['sfdr_gain_dbc']['mean']:+.2f} dBc "
                f"at alpha={best['alpha']:g}")
    if command == "pareto":
        n_mse = len(result["fronts"]["mse_improvement_db"])
        n_sfdr = len(result["fronts"]["sfdr_gain_dbc"])
        return (f"{len(result['rows'])} grid cells; front sizes: "
                f"{n_mse} (MSE), {n_sfdr} (SFDR)")
    if command == "export-hex":
        return f"wrote {result['path']}"
    return "done"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig()
        if args.config:
            cfg = load_config(args.config, cfg)
        cfg = apply_overrides(cfg, seed=args.seed, out_dir=args.out,
                              trials=args.trials, threads=args.threads)
        result = _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"{args.command}: {_summarize(args.command, result)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
