"""Statistical contracts of the experiment drivers.

These are the slow, end-to-end checks: full sweeps with pinned seeds and
wide-but-fixed tolerance bands.  Artifact layout and CLI plumbing are
covered in test_config_cli.py; this module cares about the numbers.
"""

import numpy as np

from lutforge.config import ExperimentConfig
from lutforge.experiments import run_pareto, run_sweep_alpha


def test_sweep_dither_response(greedy10, tmp_path):
    """Output SFDR gain vs. dither amplitude: flat floor, steep knee.

    Small amplitudes leave the requantized table output essentially as
    periodic as the raw quantizer (no gain); full-step dither buys the
    large gain, at the usual MSE cost of about 3 dB.
    """
    cfg = ExperimentConfig(
        trials=20,
        alpha_grid=(0.0, 0.2, 0.25, 0.5, 0.75, 0.9, 1.0),
        mask=greedy10.mask.to_string(),
        out_dir=str(tmp_path),
    )
    table = run_sweep_alpha(cfg)["table"]
    gains = {a: e["sfdr_gain_dbc"]["mean"] for a, e in table.items()}
    for a in sorted(gains):
        print(f"  alpha={a:<5g} gain {gains[a]:7.2f} dBc "
              f"mse {table[a]['mse_db']['mean']:8.3f} dB", flush=True)

    assert max(g for a, g in gains.items() if a >= 0.5) >= 15.0
    assert gains[0.2] <= 0.5
    penalty = table[1.0]["mse_db"]["mean"] - table[0.0]["mse_db"]["mean"]
    assert 2.3 <= penalty <= 3.7


def test_pareto_reduced_grid_liveness(tmp_path):
    """The coarse published grid completes and yields a usable front."""
    cfg = ExperimentConfig(
        trials=1,
        threads=4,
        eps_grid=(0.5, 0.7, 0.9, 1.0),
        out_dir=str(tmp_path),
    )
    res = run_pareto(cfg)
    assert len(res["rows"]) == 5 * 4 * 4
    for objective, members in res["fronts"].items():
        mems = {r["memory_bits"] for r in members}
        print(f"  {objective}: {len(members)} members, "
              f"{len(mems)} distinct memory sizes", flush=True)
        assert members
        assert len(mems) >= 3


def test_front_beta_dominance(pareto_default):
    """Along the MSE front, bigger masks win at almost every memory step.

    The front is sorted by memory; the mask size beta should be
    non-decreasing along it, up to occasional swaps where a smaller mask
    with a richer entry set ties a larger one.
    """
    front = pareto_default["fronts"]["mse_improvement_db"]
    betas = [r["beta"] for r in sorted(front, key=lambda r: r["memory_bits"])]
    pairs = list(zip(betas, betas[1:]))
    frac = np.mean([b2 >= b1 for b1, b2 in pairs])
    print(f"  beta along front: {betas} (non-decreasing fraction {frac:.2f})",
          flush=True)
    assert frac >= 0.9
