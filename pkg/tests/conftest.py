"""Shared fixtures.

The expensive design artifacts (quadrature contexts, the N=10 greedy mask
run, the N=7 exact probability table) are session-scoped: several test
modules and most acceptance gates reuse them.
"""

import numpy as np
import pytest

from lutforge import estimator as est
from lutforge.mask_opt import greedy_mask
from lutforge.quantizer import UniformQuantizer
from lutforge.tone import ToneModel


@pytest.fixture(scope="session")
def qz3():
    return UniformQuantizer(3)


@pytest.fixture(scope="session")
def ctx4(qz3):
    return est.LikelihoodContext(qz3, ToneModel(n_window=4))


@pytest.fixture(scope="session")
def ctx7(qz3):
    return est.LikelihoodContext(qz3, ToneModel(n_window=7))


@pytest.fixture(scope="session")
def ctx10(qz3):
    return est.LikelihoodContext(qz3, ToneModel(n_window=10))


@pytest.fixture(scope="session")
def greedy10(ctx10):
    """Greedy H3 trajectory up to beta = bN/2 = 15 on the N=10 window."""
    return greedy_mask(15, "H3", ctx10)


@pytest.fixture(scope="session")
def n7_table(ctx7):
    """Exact full-mask index probabilities at N=7 (2^21 windows)."""
    from lutforge.bitmask import BitMask

    mask = BitMask.full(3, 7)
    keys, den, _ = est.index_moments(ctx7, mask, want_num=False)
    return mask, keys, den


@pytest.fixture(scope="session")
def simulate20(tmp_path_factory):
    """20-trial dither baseline study; shared by the MSE and SFDR gates."""
    from lutforge import experiments
    from lutforge.config import ExperimentConfig

    out = tmp_path_factory.mktemp("simulate20")
    return experiments.run_simulate(ExperimentConfig(trials=20, out_dir=str(out)))


@pytest.fixture(scope="session")
def pareto_default(tmp_path_factory):
    """Default-grid memory/performance sweep (seed 0, 5 paired trials)."""
    from lutforge import experiments
    from lutforge.config import ExperimentConfig

    out = tmp_path_factory.mktemp("pareto")
    return experiments.run_pareto(
        ExperimentConfig(trials=5, threads=4, out_dir=str(out)))
