"""Design, compress, and evaluate dithered correction tables for coarse
quantizer outputs.

The pipeline: model a noisy tone through a uniform quantizer, estimate each
sample from a bit-masked window of output codes (posterior mean under the
random-phase tone prior), keep only the high-probability window indexes,
store the estimates in a table with one of three dithering architectures,
and measure MSE / SFDR / memory trade-offs.
"""

from .quantizer import UniformQuantizer, get_quantizer, requantize
from .tone import ToneModel, generate_sequence, sample_tone, prior_x0
from .bitmask import (BitMask, apply_mask, encode_index, decode_index,
                      mirror_index, dyadic_expand)
from .estimator import (LikelihoodContext, NumericalError, index_moments,
                        node_information, window_likelihood, mmse_estimate,
                        fisher_information, cell_probability)
from .mask_opt import (HEURISTICS, GreedyResult, eval_heuristic, greedy_mask,
                       brute_force_mask)
from .hpi import (HpiSet, build_hpi_exact, build_hpi_montecarlo,
                  expected_coverage, index_probability, read_hpi, write_hpi)
from .dither import (DitherSpec, LutTable, build_lut, lookup, lookup_stream,
                     lookup_estimates, sample_dither, sample_discrete_dither,
                     discrete_dither_support, read_lut, write_lut, export_hex)
from .metrics import (MetricReport, mse_db, periodogram, sfdr_dbc,
                      memory_bits, pareto_front, write_metric_csv,
                      write_psd_csv)
from .config import ConfigError, ExperimentConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "UniformQuantizer", "get_quantizer", "requantize",
    "ToneModel", "generate_sequence", "sample_tone", "prior_x0",
    "BitMask", "apply_mask", "encode_index", "decode_index", "mirror_index",
    "dyadic_expand",
    "LikelihoodContext", "NumericalError", "index_moments", "node_information",
    "window_likelihood", "mmse_estimate", "fisher_information",
    "cell_probability",
    "HEURISTICS", "GreedyResult", "eval_heuristic", "greedy_mask",
    "brute_force_mask",
    "HpiSet", "build_hpi_exact", "build_hpi_montecarlo", "expected_coverage",
    "index_probability", "read_hpi", "write_hpi",
    "DitherSpec", "LutTable", "build_lut", "lookup", "lookup_stream",
    "lookup_estimates", "sample_dither", "sample_discrete_dither",
    "discrete_dither_support", "read_lut", "write_lut", "export_hex",
    "MetricReport", "mse_db", "periodogram", "sfdr_dbc", "memory_bits",
    "pareto_front", "write_metric_csv", "write_psd_csv",
    "ConfigError", "ExperimentConfig", "load_config",
]
