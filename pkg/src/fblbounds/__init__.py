"""Exact finite-blocklength bounds for discrete channels under any decoding metric."""

from .bounds import (BoundCurve, BoundPoint, PairTable, RatePoint, cdf_F, clipped_union_P,
                     clipped_union_rate, error_exponent, exact_rc_error, exact_rc_error_rate,
                     exponent_derivative, f_pairwise, weighted_tail_integral,
                     quadrature_identity_residual, sweep, sweep_sizes)
from .channel import (Channel, ChannelError, ChannelProblem, Metric, OutputDist, PairwiseStats,
                      Prior, exceed_prob, load_channel, load_channel_file, ml_metric,
                      pairwise_stats)
from .hypothesis_testing import (JointDist, MatchedWitness, NPResult, WitnessError, beta_vs_F,
                                 matched_witness, meta_converse_code_bound, np_beta)
from .product import (BECSpec, BSCSpec, bec_exact_rc, bec_F, bec_P_clipped, bsc_exact_rc,
                      bsc_F, bsc_P_clipped, product_sweep)
from .simulator import (Codebook, MCEstimate, converse_equality_check, evaluate_code_exact,
                        random_coding_mc)

__version__ = "0.1.0"

__all__ = [
    "BoundCurve", "BoundPoint", "PairTable", "RatePoint", "cdf_F", "clipped_union_P",
    "clipped_union_rate", "error_exponent", "exact_rc_error", "exact_rc_error_rate",
    "exponent_derivative", "f_pairwise", "weighted_tail_integral",
    "quadrature_identity_residual", "sweep", "sweep_sizes", "Channel", "ChannelError",
    "ChannelProblem", "Metric", "OutputDist", "PairwiseStats", "Prior", "exceed_prob",
    "load_channel", "load_channel_file", "ml_metric", "pairwise_stats", "JointDist",
    "MatchedWitness", "NPResult", "WitnessError", "beta_vs_F", "matched_witness",
    "meta_converse_code_bound", "np_beta", "BECSpec", "BSCSpec", "bec_exact_rc", "bec_F",
    "bec_P_clipped", "bsc_exact_rc", "bsc_F", "bsc_P_clipped", "product_sweep", "Codebook",
    "MCEstimate", "converse_equality_check", "evaluate_code_exact", "random_coding_mc",
]
