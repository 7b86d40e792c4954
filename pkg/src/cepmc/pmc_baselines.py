"""Local- and global-resampling population Monte Carlo baselines.

Both baselines keep every proposal's covariance fixed at its initial value
and move only the means, by multinomial resampling of the current samples
under indicator-weighted DM weights at the final threshold (no tempering).

Zero-weight conventions: if a proposal's K weights are all zero, LR-PMC
resets them to 1/K for that proposal before resampling; GR-PMC resets all NK
weights to 1/NK, but only when every one of them is zero.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import AllWeightsZero
from .estimation import EstimateResult, EstimatorKind, effective_sample_size, final_trial_estimate
from .gaussian import GaussianParams, draw
from .weighting import WeightedBatch, dm_weights

from .cepmc import RunConfig, initial_state


def multinomial_resample(weights, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` indices drawn i.i.d. categorically with the given weights."""
    weights = np.asarray(weights, dtype=float).ravel()
    if count < 1:
        raise ValueError("count must be >= 1")
    total = weights.sum()
    if not total > 0:
        raise AllWeightsZero("cannot resample from all-zero weights")
    cdf = np.cumsum(weights / total)
    indices = np.searchsorted(cdf, rng.random(count), side="right")
    return np.minimum(indices, weights.size - 1)


def _run_resampling_pmc(problem, config: RunConfig, init, rng, mode: str, seed):
    start = time.perf_counter()
    state = initial_state(config, init)
    n_prop, n_per = config.n_proposals, config.samples_per_proposal
    fixed_covs = [p.cov for p in state.proposals]
    proposals = list(state.proposals)
    gamma = problem.gamma
    batches: list[WeightedBatch] = []
    convention_hits = 0

    generators = proposals
    for trial in range(1, config.trials + 1):
        generators = proposals
        samples = np.stack([draw(p, rng, n_per) for p in proposals])
        weights = dm_weights(samples, proposals, problem.log_base_density)
        flat = samples.reshape(n_prop * n_per, -1)
        performances = np.asarray(problem.performance(flat), dtype=float).reshape(n_prop, n_per)
        batches.append(WeightedBatch(
            samples=samples, performances=performances, dm_weights=weights,
            level=gamma, trial_index=trial,
        ))
        hit_weights = weights * (performances >= gamma)
        if mode == "local":
            convention_hits += int(np.count_nonzero(~np.any(hit_weights > 0, axis=1)))
        else:
            convention_hits += int(not np.any(hit_weights > 0))
        resample_weights = apply_zero_weight_convention(hit_weights, mode)

        if mode == "local":
            new_means = [
                samples[n][multinomial_resample(resample_weights[n], 1, rng)[0]]
                for n in range(n_prop)
            ]
        else:
            idx = multinomial_resample(resample_weights.ravel(), n_prop, rng)
            pooled = samples.reshape(n_prop * n_per, -1)
            new_means = [pooled[i] for i in idx]
        proposals = [GaussianParams(m, c) for m, c in zip(new_means, fixed_covs)]

    final = batches[-1]
    result = EstimateResult(
        estimate=final_trial_estimate(final, gamma),
        estimator_kind=EstimatorKind.FINAL_TRIAL,
        n_effective=effective_sample_size(final.dm_weights),
        level_trace=[gamma] * config.trials,
        seed=config.seed if seed is None else seed,
        runtime_ms=(time.perf_counter() - start) * 1e3,
        diagnostics={
            "zero_weight_convention_trials": convention_hits,
            "mode": mode,
            "final_proposals": generators,
        },
    )
    return result, batches


def apply_zero_weight_convention(weights: np.ndarray, mode: str) -> np.ndarray:
    """Replace all-zero weight groups with uniform mass.

    ``mode="local"``: any (N, K) row that is entirely zero becomes 1/K.
    ``mode="global"``: the whole array becomes 1/(NK), but only if every
    entry is zero.  Groups with any positive weight are left untouched.
    """
    weights = np.asarray(weights, dtype=float)
    out = weights.copy()
    if mode == "local":
        n_per = weights.shape[1]
        dead = ~np.any(weights > 0, axis=1)
        out[dead] = 1.0 / n_per
    elif mode == "global":
        if not np.any(weights > 0):
            out[...] = 1.0 / weights.size
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return out


def run_lr_pmc(problem, config: RunConfig, init, rng: np.random.Generator,
               seed: int | None = None):
    """Local-resampling PMC: each proposal's next mean is resampled from its
    own K samples."""
    return _run_resampling_pmc(problem, config, init, rng, "local", seed)


def run_gr_pmc(problem, config: RunConfig, init, rng: np.random.Generator,
               seed: int | None = None):
    """Global-resampling PMC: all N next means come from one multinomial pass
    over the pooled NK samples."""
    return _run_resampling_pmc(problem, config, init, rng, "global", seed)
