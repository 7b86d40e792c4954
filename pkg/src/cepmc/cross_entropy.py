"""Classic single-proposal multilevel cross-entropy method.

The adaptive loop raises a tempered threshold toward the target level by
taking the (1 - rho) sample quantile of each batch's performances, and moves
the proposal by solving the weighted maximum-likelihood update restricted to
elite samples.  Used both as a baseline estimator and as the building block
for the population variant.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBatch, MaxIterationsExceeded, NotPositiveDefinite
from .estimation import EstimateResult, EstimatorKind, effective_sample_size
from .gaussian import GaussianParams, draw, weighted_moment_update
from .weighting import elite_mask, standard_is_weights

# Stand-in for "any value below gamma": lowest finite double.
LEVEL_FLOOR = -float(np.finfo(float).max)


class Termination(enum.Enum):
    LEVEL_REACHED = "level_reached"
    MAX_ITERATIONS = "max_iterations"


@dataclass
class CeTrace:
    """Per-iteration record of levels and proposal parameters."""

    levels: list[float] = field(default_factory=list)
    parameters: list[GaussianParams] = field(default_factory=list)
    iterations: int = 0
    terminated_by: Termination = Termination.LEVEL_REACHED


def sample_quantile(performances, rho: float) -> float:
    """Order statistic S_(ceil((1-rho)K)) of the performances (1-based).

    This is the (1 - rho) sample quantile used to set tempered levels.
    """
    performances = np.asarray(performances, dtype=float).ravel()
    if performances.size == 0:
        raise EmptyBatch("cannot take a quantile of an empty batch")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    k = performances.size
    index = math.ceil((1.0 - rho) * k)
    index = min(max(index, 1), k)
    return float(np.sort(performances)[index - 1])


def ce_update(
    samples,
    performances,
    level: float,
    previous: GaussianParams,
    target_log_density,
    update_cov: bool = True,
) -> GaussianParams:
    """One elite-weighted moment update against the generating proposal.

    Weights are I{S >= level} * pi(x)/q(x; previous); raises AllWeightsZero
    when no elite sample carries positive weight.
    """
    weights = standard_is_weights(samples, previous, target_log_density)
    weights = weights * elite_mask(performances, level)
    return weighted_moment_update(
        samples, weights, update_cov=update_cov,
        retained_cov=None if update_cov else previous.cov,
    )


def run_ce(
    problem,
    rho: float,
    n_samples: int,
    max_iterations: int,
    init: GaussianParams,
    rng: np.random.Generator,
    cov_schedule_start: int = 1,
    seed: int | None = None,
) -> tuple[EstimateResult, CeTrace]:
    """Adaptive multilevel cross-entropy run terminating at the target level.

    Each iteration draws ``n_samples`` from the current proposal, sets the
    tempered level to min(sample quantile, gamma), and updates the proposal
    only while the level is still short of gamma.  On termination the
    estimate is the indicator-weighted mean over the terminal batch; that
    batch is reused as drawn, no fresh draw is made after the loop.

    Covariance updates start at iteration ``cov_schedule_start`` (1-based;
    the default updates mean and covariance together from the start).  A
    value above ``max_iterations`` adapts the mean only, which is the robust
    choice for near-linear performance functions where weighted covariance
    estimates collapse; when a covariance update does go singular, the
    previous covariance is kept and the mean step is still taken.

    Raises MaxIterationsExceeded (partial trace attached) if the level never
    reaches gamma.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples per iteration")
    start = time.perf_counter()
    trace = CeTrace()
    params = init
    gamma = problem.gamma
    level = LEVEL_FLOOR
    performances = None
    retained = 0
    while level < gamma:
        if trace.iterations >= max_iterations:
            trace.terminated_by = Termination.MAX_ITERATIONS
            raise MaxIterationsExceeded(
                f"level {level:.6g} still below gamma {gamma:.6g} after {max_iterations} iterations",
                trace=trace,
            )
        samples = draw(params, rng, n_samples)
        performances = np.asarray(problem.performance(samples), dtype=float)
        level = min(sample_quantile(performances, rho), gamma)
        if level < gamma:
            update_cov = trace.iterations + 1 >= cov_schedule_start
            candidate = ce_update(samples, performances, level, params,
                                  problem.log_base_density, update_cov=update_cov)
            if update_cov:
                try:
                    candidate.chol()
                except NotPositiveDefinite:
                    candidate = GaussianParams(candidate.mean, params.cov)
                    retained += 1
            params = candidate
        trace.iterations += 1
        trace.levels.append(level)
        trace.parameters.append(params)
    # Terminal iteration applies no update, so ``params`` still generated the
    # terminal batch and these are plain importance weights for it.
    weights = standard_is_weights(samples, params, problem.log_base_density)
    estimate = float(np.mean((performances >= gamma) * weights))
    result = EstimateResult(
        estimate=estimate,
        estimator_kind=EstimatorKind.FINAL_TRIAL,
        n_effective=effective_sample_size(weights),
        level_trace=list(trace.levels),
        seed=seed,
        runtime_ms=(time.perf_counter() - start) * 1e3,
        diagnostics={"iterations": trace.iterations, "retained_covariances": retained,
                     "final_proposals": [params]},
    )
    return result, trace


def run_ce_fixed_trials(
    problem,
    rho: float,
    n_samples: int,
    trials: int,
    init: GaussianParams,
    rng: np.random.Generator,
    cov_schedule_start: int = 1,
    seed: int | None = None,
) -> tuple[EstimateResult, CeTrace]:
    """Fixed-trial-count variant of the multilevel cross-entropy loop.

    Runs exactly ``trials`` iterations with the level capped at gamma and the
    elite update applied every iteration, mirroring the population method's
    schedule for a single proposal.  Covariance updates start at trial index
    ``cov_schedule_start`` (1-based); earlier trials move the mean only.
    """
    start = time.perf_counter()
    trace = CeTrace()
    params = init
    gamma = problem.gamma
    last = None
    generator = init
    for trial in range(1, trials + 1):
        generator = params
        samples = draw(params, rng, n_samples)
        performances = np.asarray(problem.performance(samples), dtype=float)
        level = min(sample_quantile(performances, rho), gamma)
        weights = standard_is_weights(samples, params, problem.log_base_density)
        last = (performances, weights)
        params = weighted_moment_update(
            samples,
            weights * elite_mask(performances, level),
            update_cov=trial >= cov_schedule_start,
            retained_cov=None if trial >= cov_schedule_start else params.cov,
        )
        trace.iterations += 1
        trace.levels.append(level)
        trace.parameters.append(params)
    performances, weights = last
    estimate = float(np.mean((performances >= gamma) * weights))
    result = EstimateResult(
        estimate=estimate,
        estimator_kind=EstimatorKind.FINAL_TRIAL,
        n_effective=effective_sample_size(weights),
        level_trace=list(trace.levels),
        seed=seed,
        runtime_ms=(time.perf_counter() - start) * 1e3,
        diagnostics={"iterations": trace.iterations, "final_proposals": [generator]},
    )
    return result, trace
