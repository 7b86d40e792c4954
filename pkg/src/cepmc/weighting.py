"""Importance weights and elite selection.

Two weighting schemes are provided: the standard importance-sampling ratio
against a single proposal, and the deterministic-mixture (DM) weight whose
denominator is the equal-weight mixture of all N proposals evaluated at the
sample, including the sample's own generator.  The rare-event indicator is
never folded in here; callers apply it for elite selection and estimation so
the same weights serve both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import NonFiniteWeight
from .gaussian import GaussianParams, log_density


@dataclass
class WeightedBatch:
    """One trial's samples with their performances and DM weights.

    samples: (N, K, D); performances, dm_weights: (N, K).  ``level`` is the
    tempered threshold used by the trial that produced the batch (capped at
    the run's target threshold) and ``trial_index`` counts trials from 1.
    """

    samples: np.ndarray
    performances: np.ndarray
    dm_weights: np.ndarray
    level: float
    trial_index: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.performances = np.asarray(self.performances, dtype=float)
        self.dm_weights = np.asarray(self.dm_weights, dtype=float)
        if self.samples.ndim != 3:
            raise ValueError("samples must have shape (N, K, D)")
        if self.performances.shape != self.samples.shape[:2]:
            raise ValueError("performances must have shape (N, K)")
        if self.dm_weights.shape != self.samples.shape[:2]:
            raise ValueError("dm_weights must have shape (N, K)")

    @property
    def total_samples(self) -> int:
        return self.performances.size


def dm_weights(samples, proposals, target_log_density) -> np.ndarray:
    """Deterministic-mixture weights for an (N, K, D) array of samples.

    weight[n, k] = pi(x) / ((1/N) * sum_m q_m(x)), computed in log space with
    the mixture term exponentiated against its per-sample maximum.  The
    numerator is the base density only; no indicator.

    Raises NonFiniteWeight if any weight exponentiates to NaN or infinity.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 3:
        raise ValueError("samples must have shape (N, K, D)")
    n_prop, n_per, dim = arr.shape
    if len(proposals) != n_prop:
        raise ValueError(f"{len(proposals)} proposals for {n_prop} sample rows")
    flat = arr.reshape(n_prop * n_per, dim)
    log_num = np.asarray(target_log_density(flat), dtype=float)
    log_q = np.stack([np.atleast_1d(log_density(p, flat)) for p in proposals])
    log_mix = logsumexp(log_q, axis=0) - np.log(n_prop)
    with np.errstate(over="ignore"):
        weights = np.exp(log_num - log_mix)
    if not np.all(np.isfinite(weights)):
        bad = np.flatnonzero(~np.isfinite(weights))
        raise NonFiniteWeight(
            f"{bad.size} non-finite weights (first at flat index {bad[0]})",
            bad_indices=bad,
            log_numerator=log_num[bad],
            log_denominator=log_mix[bad],
        )
    return weights.reshape(n_prop, n_per)


def standard_is_weights(samples, proposal: GaussianParams, target_log_density) -> np.ndarray:
    """Importance weights pi(x)/q(x) against a single proposal.

    An empty sample list yields an empty weight array.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        return np.zeros(0)
    arr = np.atleast_2d(arr)
    return dm_weights(arr[np.newaxis, :, :], [proposal], target_log_density)[0]


def elite_mask(performances, level: float) -> np.ndarray:
    """Boolean mask of samples at or above the level; ties are elite."""
    if not np.isfinite(level):
        raise ValueError("level must be finite")
    return np.asarray(performances, dtype=float) >= level
