"""Cross-entropy population Monte Carlo.

A population of N Gaussian proposals is adapted over T trials.  Every trial
draws K samples per proposal, weights all NK samples with deterministic
mixture weights, pools the NK performances to set one shared tempered level,
and then solves an independent elite-weighted moment update for each
proposal over its own K samples.

Operational conventions for the updates:

* covariance updates only start at a configurable trial index (first half of
  the trials moves means only, by default);
* a proposal whose updated covariance fails factorization keeps the previous
  trial's covariance while still taking the mean step;
* a proposal with no elite weight mass is frozen for the trial.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .cross_entropy import sample_quantile
from .errors import NotPositiveDefinite
from .estimation import EstimateResult, EstimatorKind, effective_sample_size, final_trial_estimate
from .gaussian import GaussianParams, draw, weighted_moment_update
from .weighting import WeightedBatch, dm_weights, elite_mask


@dataclass(frozen=True)
class RunConfig:
    """Sampler sizes and schedule for one adaptive run.

    ``cov_schedule_start`` is the 1-based trial index at which covariance
    updates begin; ``None`` resolves to ceil(T/2) + 1, i.e. means only in the
    first half of the trials.  ``T + 1`` disables covariance updates.
    """

    n_proposals: int
    samples_per_proposal: int
    trials: int
    rho: float = 0.1
    cov_schedule_start: int | None = None
    seed: int = 0
    final_fresh_batch: bool = False

    def __post_init__(self):
        if self.n_proposals < 1 or self.samples_per_proposal < 1 or self.trials < 1:
            raise ValueError("n_proposals, samples_per_proposal, and trials must all be >= 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.cov_schedule_start is None:
            object.__setattr__(self, "cov_schedule_start", math.ceil(self.trials / 2) + 1)
        if not 1 <= self.cov_schedule_start <= self.trials + 1:
            raise ValueError("cov_schedule_start must lie in [1, trials + 1]")


@dataclass
class PopulationState:
    """Proposal parameters plus trial counter and level trace for one run."""

    proposals: list[GaussianParams]
    trial: int
    level_trace: list[float]
    config: RunConfig

    def __post_init__(self):
        dims = {p.dim for p in self.proposals}
        if len(dims) != 1:
            raise ValueError(f"proposals must share one dimension, got {sorted(dims)}")


def initial_state(config: RunConfig, init: list[GaussianParams]) -> PopulationState:
    if len(init) != config.n_proposals:
        raise ValueError(f"expected {config.n_proposals} initial proposals, got {len(init)}")
    return PopulationState(proposals=list(init), trial=1, level_trace=[], config=config)


def cepmc_trial(
    state: PopulationState,
    problem,
    rng: np.random.Generator,
    diagnostics: list | None = None,
) -> tuple[PopulationState, WeightedBatch]:
    """Run one trial: sample, weight, level, and per-proposal updates.

    Returns the advanced state and the trial's batch.  The batch stores raw
    DM weights; the elite indicator is applied only transiently for the
    updates.  Fallback events (frozen proposals, retained covariances) are
    appended to ``diagnostics`` when a list is supplied.
    """
    cfg = state.config
    n_prop, n_per = cfg.n_proposals, cfg.samples_per_proposal
    samples = np.stack([draw(p, rng, n_per) for p in state.proposals])
    weights = dm_weights(samples, state.proposals, problem.log_base_density)
    flat = samples.reshape(n_prop * n_per, -1)
    performances = np.asarray(problem.performance(flat), dtype=float).reshape(n_prop, n_per)
    level = min(sample_quantile(performances, cfg.rho), problem.gamma)
    elite = elite_mask(performances, level)
    update_cov = state.trial >= cfg.cov_schedule_start

    updated = []
    for n, previous in enumerate(state.proposals):
        elite_weights = weights[n] * elite[n]
        if not np.any(elite_weights > 0):
            updated.append(previous)
            if diagnostics is not None:
                diagnostics.append({"trial": state.trial, "proposal": n, "event": "frozen_no_elite"})
            continue
        if not update_cov:
            updated.append(weighted_moment_update(
                samples[n], elite_weights, update_cov=False, retained_cov=previous.cov))
            continue
        candidate = weighted_moment_update(samples[n], elite_weights, update_cov=True)
        try:
            candidate.chol()
        except NotPositiveDefinite:
            candidate = GaussianParams(candidate.mean, previous.cov)
            if diagnostics is not None:
                diagnostics.append({"trial": state.trial, "proposal": n, "event": "covariance_retained"})
        updated.append(candidate)

    batch = WeightedBatch(
        samples=samples,
        performances=performances,
        dm_weights=weights,
        level=level,
        trial_index=state.trial,
    )
    next_state = PopulationState(
        proposals=updated,
        trial=state.trial + 1,
        level_trace=state.level_trace + [level],
        config=cfg,
    )
    return next_state, batch


def run_cepmc(
    problem,
    config: RunConfig,
    init: list[GaussianParams],
    rng: np.random.Generator,
    seed: int | None = None,
) -> tuple[EstimateResult, list[WeightedBatch]]:
    """Full population run: T trials, then the final-trial estimate.

    All T batches are returned.  The estimate uses the last batch exactly as
    drawn; with ``config.final_fresh_batch`` an extra batch is drawn from the
    post-update proposals, appended to the returned list, and used for the
    estimate instead (T + 1 batches are then returned).
    """
    start = time.perf_counter()
    state = initial_state(config, init)
    events: list = []
    batches: list[WeightedBatch] = []
    generators = state.proposals
    for _ in range(config.trials):
        generators = state.proposals
        state, batch = cepmc_trial(state, problem, rng, diagnostics=events)
        batches.append(batch)

    if config.final_fresh_batch:
        generators = state.proposals
        samples = np.stack([draw(p, rng, config.samples_per_proposal) for p in state.proposals])
        weights = dm_weights(samples, state.proposals, problem.log_base_density)
        flat = samples.reshape(config.n_proposals * config.samples_per_proposal, -1)
        performances = np.asarray(problem.performance(flat), dtype=float)
        batches.append(WeightedBatch(
            samples=samples,
            performances=performances.reshape(config.n_proposals, config.samples_per_proposal),
            dm_weights=weights,
            level=problem.gamma,
            trial_index=config.trials + 1,
        ))

    final = batches[-1]
    result = EstimateResult(
        estimate=final_trial_estimate(final, problem.gamma),
        estimator_kind=EstimatorKind.FINAL_TRIAL,
        n_effective=effective_sample_size(final.dm_weights),
        level_trace=list(state.level_trace),
        seed=config.seed if seed is None else seed,
        runtime_ms=(time.perf_counter() - start) * 1e3,
        diagnostics={
            "fallback_events": events,
            "frozen_updates": sum(1 for e in events if e["event"] == "frozen_no_elite"),
            "retained_covariances": sum(1 for e in events if e["event"] == "covariance_retained"),
            "final_proposals": generators,
        },
    )
    return result, batches
