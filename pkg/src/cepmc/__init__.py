"""Rare-event probability estimation with adaptive importance sampling.

Core pieces: Gaussian proposal primitives, deterministic-mixture importance
weights, the single-proposal multilevel cross-entropy method, its population
variant with per-proposal updates, local/global resampling PMC baselines, a
benchmark problem library (structural limit states, a dimension-invariant
linear problem, orbital conjunction), and a seeded experiment harness.
"""

from .cepmc import PopulationState, RunConfig, cepmc_trial, run_cepmc
from .cross_entropy import CeTrace, Termination, ce_update, run_ce, run_ce_fixed_trials, sample_quantile
from .errors import (
    AllWeightsZero,
    CepmcError,
    ConfigError,
    EmptyBatch,
    MaxIterationsExceeded,
    NoConvergence,
    NonFiniteWeight,
    NotPositiveDefinite,
)
from .estimation import (
    EstimateResult,
    EstimatorKind,
    all_trials_estimate,
    effective_sample_size,
    final_trial_estimate,
    rrmse,
    run_plain_mc,
)
from .gaussian import GaussianParams, draw, factorize, log_density, weighted_moment_update
from .orbits import OrbitalState, kepler_propagate, propagate_batch
from .pmc_baselines import multinomial_resample, run_gr_pmc, run_lr_pmc
from .problems import (
    ConjunctionScenario,
    RareEventProblem,
    default_conjunction_scenario,
    make_conjunction,
    make_s1,
    make_s2,
    make_s3,
    make_s4,
    normal_cdf,
)
from .weighting import WeightedBatch, dm_weights, elite_mask, standard_is_weights

__all__ = [
    "AllWeightsZero",
    "CeTrace",
    "CepmcError",
    "ConfigError",
    "ConjunctionScenario",
    "EmptyBatch",
    "EstimateResult",
    "EstimatorKind",
    "GaussianParams",
    "MaxIterationsExceeded",
    "NoConvergence",
    "NonFiniteWeight",
    "NotPositiveDefinite",
    "OrbitalState",
    "PopulationState",
    "RareEventProblem",
    "RunConfig",
    "Termination",
    "WeightedBatch",
    "all_trials_estimate",
    "ce_update",
    "cepmc_trial",
    "default_conjunction_scenario",
    "dm_weights",
    "draw",
    "effective_sample_size",
    "elite_mask",
    "factorize",
    "final_trial_estimate",
    "kepler_propagate",
    "log_density",
    "make_conjunction",
    "make_s1",
    "make_s2",
    "make_s3",
    "make_s4",
    "multinomial_resample",
    "normal_cdf",
    "propagate_batch",
    "rrmse",
    "run_ce",
    "run_ce_fixed_trials",
    "run_cepmc",
    "run_gr_pmc",
    "run_lr_pmc",
    "run_plain_mc",
    "sample_quantile",
    "standard_is_weights",
    "weighted_moment_update",
]

__version__ = "0.1.0"
