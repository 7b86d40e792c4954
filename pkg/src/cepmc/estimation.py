"""Probability estimators, error metrics, and run diagnostics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import AllWeightsZero, EmptyBatch
from .weighting import WeightedBatch


class EstimatorKind(enum.Enum):
    FINAL_TRIAL = "final_trial"
    ALL_TRIALS = "all_trials"
    PLAIN_MC = "plain_mc"


@dataclass
class EstimateResult:
    """A probability estimate with provenance and diagnostics.

    ``estimate`` is reported raw (never clamped to [0, 1]) so that bias and
    variance studies stay honest; weight noise can push it above 1.
    """

    estimate: float
    estimator_kind: EstimatorKind
    n_effective: float
    level_trace: list[float] = field(default_factory=list)
    seed: int | None = None
    runtime_ms: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.estimate) or self.estimate < 0:
            raise ValueError(f"estimate must be finite and nonnegative, got {self.estimate}")


def final_trial_estimate(batch: WeightedBatch, gamma: float) -> float:
    """(1/NK) * sum over the batch of I{S >= gamma} * w."""
    if batch.total_samples == 0:
        raise EmptyBatch("cannot estimate from an empty batch")
    hit = batch.performances >= gamma
    return float(np.sum(batch.dm_weights * hit) / batch.total_samples)


def all_trials_estimate(batches, gamma: float) -> float:
    """Mean of the per-trial estimates over all T batches.

    For equally sized batches this equals the triple sum
    (1/TNK) * sum_t sum_n sum_k I{S >= gamma} * w.
    """
    if len(batches) == 0:
        raise EmptyBatch("need at least one batch")
    return float(np.mean([final_trial_estimate(b, gamma) for b in batches]))


def rrmse(estimates, reference: float) -> float:
    """Relative root mean squared error: sqrt(mean((est - ref)^2)) / ref."""
    estimates = np.asarray(estimates, dtype=float)
    if estimates.size == 0:
        raise ValueError("need at least one estimate")
    if not reference > 0:
        raise ValueError("reference must be positive")
    return float(np.sqrt(np.mean((estimates - reference) ** 2)) / reference)


def effective_sample_size(weights) -> float:
    """(sum w)^2 / sum w^2, the usual weight-degeneracy diagnostic."""
    weights = np.asarray(weights, dtype=float).ravel()
    total = weights.sum()
    if not total > 0:
        raise AllWeightsZero("effective sample size undefined for zero total weight")
    return float(total * total / np.sum(weights * weights))


def run_plain_mc(problem, n_samples: int, rng: np.random.Generator,
                 batch_size: int = 100_000, seed: int | None = None) -> EstimateResult:
    """Plain Monte Carlo hit-rate estimate, drawing from the problem's base density."""
    from .gaussian import draw  # local import keeps module dependencies one-way

    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    hits = 0
    remaining = n_samples
    while remaining > 0:
        chunk = min(batch_size, remaining)
        x = draw(problem.base, rng, chunk)
        hits += int(np.count_nonzero(problem.performance(x) >= problem.gamma))
        remaining -= chunk
    return EstimateResult(
        estimate=hits / n_samples,
        estimator_kind=EstimatorKind.PLAIN_MC,
        n_effective=float(n_samples),
        seed=seed,
        diagnostics={"hits": hits, "n_samples": n_samples},
    )
