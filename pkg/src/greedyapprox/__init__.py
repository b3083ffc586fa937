"""Greedy approximation over dictionaries and the penalized greedy estimator."""
from greedyapprox.analysis import (
    KProfile,
    NotInSpanError,
    Representation,
    best_n_term_bruteforce,
    k_functional_estimate,
    l1_norm_lp,
    rate_slope,
    soft_threshold,
    synth_bp_function,
    weak_lp_quasinorm,
)
from greedyapprox.dictionary import AtomSet, Dictionary, select_max_correlation, truncation_size
from greedyapprox.greedy import GreedyConfig, GreedyTrace, residual_bound_check, run
from greedyapprox.hilbert import GramState, SpaceContext, gram_extend, inner, norm, project_onto_span
from greedyapprox.kernels import BACKEND
from greedyapprox.learn import (
    FitResult,
    LearnConfig,
    SampleSet,
    SyntheticModel,
    excess_risk,
    fit,
    holdout_fit,
    kappa0,
    truncate,
)

__version__ = "0.1.0"
