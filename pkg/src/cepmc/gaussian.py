"""Multivariate Gaussian primitives.

Everything the adaptive samplers need from the Gaussian family: a parameter
container, a lower-triangular factorization used both for sampling and as the
singularity test, normalized log-densities, and the closed-form weighted
moment update that maximizes a weighted Gaussian log-likelihood.

All densities are handled in log space; callers exponentiate differences so
that rare-event magnitudes never underflow inside this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import AllWeightsZero, NotPositiveDefinite

# Relative pivot threshold below which a successful factorization is still
# declared singular (guards against nearly-flat directions that numpy accepts).
_PIVOT_RTOL = 1e-12

_SYMMETRY_RTOL = 1e-10

LOG_2PI = float(np.log(2.0 * np.pi))


def factorize(cov: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == cov.

    Raises NotPositiveDefinite if the factorization fails or any diagonal
    pivot falls below ``1e-12 * max(diag(cov))``; callers use that signal as
    the singularity test when deciding whether to keep an updated covariance.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    scale = np.max(np.abs(cov))
    asym = np.max(np.abs(cov - cov.T))
    if scale > 0 and asym > _SYMMETRY_RTOL * scale:
        raise ValueError(f"covariance is not symmetric (relative asymmetry {asym / scale:.3e})")
    try:
        lower = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    pivot_floor = _PIVOT_RTOL * np.max(np.diag(cov))
    if np.any(np.diag(lower) < pivot_floor):
        raise NotPositiveDefinite(
            f"factorization pivot below {pivot_floor:.3e}; covariance treated as singular"
        )
    return lower


@dataclass
class GaussianParams:
    """Mean and covariance of one proposal distribution.

    The covariance is symmetrized on construction to suppress floating-point
    drift from repeated updates.  Instances are treated as immutable; the
    lower-triangular factor is computed on first use and cached.
    """

    mean: np.ndarray
    cov: np.ndarray
    _chol: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError(f"covariance must be square, got shape {cov.shape}")
        if self.mean.shape[0] != cov.shape[0]:
            raise ValueError(
                f"mean length {self.mean.shape[0]} does not match covariance dimension {cov.shape[0]}"
            )
        self.cov = 0.5 * (cov + cov.T)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def chol(self) -> np.ndarray:
        """Cached lower-triangular factor of the covariance."""
        if self._chol is None:
            self._chol = factorize(self.cov)
        return self._chol


def log_density(params: GaussianParams, x: np.ndarray) -> np.ndarray | float:
    """Normalized Gaussian log-density ln N(x; mean, cov).

    Accepts a single D-vector or an (M, D) batch; returns a scalar or an
    (M,) array accordingly.
    """
    lower = params.chol()
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[-1] != params.dim:
        raise ValueError(f"points have dimension {pts.shape[-1]}, expected {params.dim}")
    # solve L z = (x - mean)^T, quadratic form is |z|^2
    resid = pts - params.mean
    z = solve_triangular(lower, resid.T, lower=True, check_finite=False)
    quad = np.sum(z * z, axis=0)
    log_det_half = np.sum(np.log(np.diag(lower)))
    out = -0.5 * params.dim * LOG_2PI - log_det_half - 0.5 * quad
    return float(out[0]) if single else out


def draw(params: GaussianParams, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` samples, returned as a (count, D) array.

    Deterministic given the generator state.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    lower = params.chol()
    z = rng.standard_normal(size=(count, params.dim))
    return params.mean + z @ lower.T


def weighted_moment_update(
    samples: np.ndarray,
    weights: np.ndarray,
    update_cov: bool = True,
    retained_cov: np.ndarray | None = None,
) -> GaussianParams:
    """Closed-form maximizer of the weighted Gaussian log-likelihood.

    mean = sum(w_k x_k) / sum(w_k); if ``update_cov``,
    cov = sum(w_k (x_k - mean)(x_k - mean)^T) / sum(w_k), i.e. the
    maximum-likelihood (1/sum-w) normalization with no unbiasedness
    correction.  With ``update_cov=False`` the caller must supply
    ``retained_cov`` to keep.

    Raises AllWeightsZero when no weight is strictly positive.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.shape[0] != samples.shape[0]:
        raise ValueError(f"{weights.shape[0]} weights for {samples.shape[0]} samples")
    if not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    total = weights.sum()
    if not total > 0:
        raise AllWeightsZero("no positive weight mass in moment update")
    mean = weights @ samples / total
    if not update_cov:
        if retained_cov is None:
            raise ValueError("retained_cov is required when update_cov=False")
        return GaussianParams(mean, retained_cov)
    centered = samples - mean
    cov = (weights * centered.T) @ centered / total
    return GaussianParams(mean, cov)
