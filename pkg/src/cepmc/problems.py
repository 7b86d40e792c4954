"""Benchmark rare-event problems.

Every problem is stored in exceedance form: the rare event is
{S(x) >= gamma}.  The structural limit states (failure at g <= 0) are
negated to fit, with gamma = 0.  Base densities are normalized Gaussians so
mixture weights are well defined.

The first two structural problems exist in two variants.  Their widely used
reference probabilities (3.01e-3 and 8.67e-7) correspond to limit states
with squared terms, while the linear forms sometimes quoted alongside them
give probabilities three orders of magnitude off; both are implemented, the
squared variant is the validated default, and plain/importance-sampled Monte
Carlo checks in the test suite pin the correspondence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gaussian import GaussianParams, log_density
from .orbits import (
    OrbitalState,
    angular_momentum,
    circular_state,
    kepler_propagate,
    propagate_batch,
)

SQRT2 = math.sqrt(2.0)

EARTH_MU = 3.986004418e14  # m^3/s^2

# Reference failure probabilities for the structural benchmarks (squared
# variants of the first two); re-validated by the Monte Carlo oracles in the
# test suite before any RRMSE use.
S1_REFERENCE = 3.01e-3
S2_REFERENCE = 8.67e-7
S3_REFERENCE = 2.22e-3


def normal_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    if not math.isfinite(z):
        raise ValueError("z must be finite")
    return 0.5 * math.erfc(-z / SQRT2)


@dataclass
class RareEventProblem:
    """A rare-event estimation target: P(S(x) >= gamma) under base density pi.

    ``performance`` and ``log_base_density`` are vectorized over a leading
    sample axis.  ``reference`` carries the true or best-known probability
    when one exists.
    """

    dim: int
    base: GaussianParams
    performance: Callable[[np.ndarray], np.ndarray]
    gamma: float
    description: str = ""
    reference: float | None = None
    log_base_density: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.base.dim != self.dim:
            raise ValueError("base density dimension does not match problem dimension")
        if self.log_base_density is None:
            base = self.base
            self.log_base_density = lambda x: log_density(base, x)


def _standard_normal(dim: int) -> GaussianParams:
    return GaussianParams(np.zeros(dim), np.eye(dim))


def make_s1(variant: str = "squared") -> RareEventProblem:
    """First structural problem: failure when 5 - x2 - 0.5*(x1-0.1)^2 <= 0."""
    if variant == "squared":
        def perf(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return x[:, 1] + 0.5 * (x[:, 0] - 0.1) ** 2 - 5.0
        reference = S1_REFERENCE
    elif variant == "linear":
        def perf(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return x[:, 1] + 0.5 * (x[:, 0] - 0.1) - 5.0
        reference = normal_cdf(-5.05 / math.sqrt(1.25))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return RareEventProblem(
        dim=2, base=_standard_normal(2), performance=perf, gamma=0.0,
        description=f"s1[{variant}]: parabolic limit state in 2-D standard normal space",
        reference=reference,
    )


def make_s2(variant: str = "squared") -> RareEventProblem:
    """Second structural problem: failure when 5 - x2 - 0.1*x1^2 <= 0."""
    if variant == "squared":
        def perf(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return x[:, 1] + 0.1 * x[:, 0] ** 2 - 5.0
        reference = S2_REFERENCE
    elif variant == "linear":
        def perf(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return x[:, 1] + 0.1 * x[:, 0] - 5.0
        reference = normal_cdf(-5.0 / math.sqrt(1.01))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return RareEventProblem(
        dim=2, base=_standard_normal(2), performance=perf, gamma=0.0,
        description=f"s2[{variant}]: shallow parabolic limit state in 2-D standard normal space",
        reference=reference,
    )


def make_s3() -> RareEventProblem:
    """Four-branch series system: failure when the branch minimum is <= 0."""
    def perf(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u, v = x[:, 0], x[:, 1]
        quad = 3.0 + (u - v) ** 2 / 10.0
        diag = (u + v) / SQRT2
        branches = np.stack([
            quad - diag,
            quad + diag,
            (u - v) + 7.0 / SQRT2,
            (v - u) + 7.0 / SQRT2,
        ])
        return -np.min(branches, axis=0)

    return RareEventProblem(
        dim=2, base=_standard_normal(2), performance=perf, gamma=0.0,
        description="s3: four-branch series system in 2-D standard normal space",
        reference=S3_REFERENCE,
    )


def make_s4(beta: float, dim: int) -> RareEventProblem:
    """Linear problem whose probability is Phi(-beta) in every dimension."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    scale = 1.0 / math.sqrt(dim)

    def perf(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x.sum(axis=1) * scale

    return RareEventProblem(
        dim=dim, base=_standard_normal(dim), performance=perf, gamma=float(beta),
        description=f"s4: sum exceedance, beta={beta}, D={dim}",
        reference=normal_cdf(-beta),
    )


@dataclass
class ConjunctionScenario:
    """Geometry and uncertainty for the orbital close-approach problem.

    Two assets share an orbital plane 10,000 m apart; a rogue object with
    isotropic Gaussian position/velocity uncertainty at the initial epoch may
    pass within ``miss_threshold`` of an asset ``horizon`` seconds later.
    """

    rogue_mean: OrbitalState
    assets: tuple[OrbitalState, OrbitalState]
    rogue_pos_sigma: float = 5.0
    rogue_vel_sigma: float = 0.1
    horizon: float = 9893.34
    miss_threshold: float = 50.0
    mu_grav: float = EARTH_MU

    ASSET_SEPARATION = 10_000.0

    def __post_init__(self):
        if self.rogue_pos_sigma <= 0 or self.rogue_vel_sigma <= 0:
            raise ValueError("sigmas must be positive")
        if self.horizon <= 0 or self.miss_threshold <= 0 or self.mu_grav <= 0:
            raise ValueError("horizon, miss_threshold, and mu_grav must be positive")
        a1, a2 = self.assets
        h1 = angular_momentum(a1.position, a1.velocity)
        h2 = angular_momentum(a2.position, a2.velocity)
        cross = np.linalg.norm(np.cross(h1, h2))
        if cross > 1e-9 * np.linalg.norm(h1) * np.linalg.norm(h2):
            raise ValueError("assets are not coplanar")
        separation = np.linalg.norm(a1.position - a2.position)
        if abs(separation - self.ASSET_SEPARATION) > 1e-6 * self.ASSET_SEPARATION:
            raise ValueError(
                f"asset separation {separation:.6f} m differs from "
                f"{self.ASSET_SEPARATION:.0f} m by more than 1e-6 relative"
            )


def default_conjunction_scenario(
    orbit_radius: float = 7.0e6,
    offset_m: float = 40.0,
    crossing_angle_deg: float = 1.0,
    mu_grav: float = EARTH_MU,
    horizon: float = 9893.34,
) -> ConjunctionScenario:
    """Circular low-orbit scenario with a rogue object on a crossing orbit.

    The assets lead/trail each other by 10,000 m of along-track arc on a
    circular orbit.  The rogue state is constructed backwards: place it
    ``offset_m`` radially outward from the first asset's position at the
    close-approach epoch, tilt its velocity plane by ``crossing_angle_deg``
    about the radial direction, and propagate back to the initial epoch, so
    the unperturbed miss distance at close approach equals ``offset_m``.
    """
    half_arc = 0.5 * ConjunctionScenario.ASSET_SEPARATION / orbit_radius
    asset_lead = circular_state(orbit_radius, mu_grav, +half_arc)
    asset_trail = circular_state(orbit_radius, mu_grav, -half_arc)

    asset_at_t1 = kepler_propagate(asset_lead, horizon, mu_grav)
    radial = asset_at_t1.position / np.linalg.norm(asset_at_t1.position)
    rogue_pos_t1 = asset_at_t1.position + offset_m * radial
    angle = math.radians(crossing_angle_deg)
    rogue_vel_t1 = _rotate_about_axis(asset_at_t1.velocity, radial, angle)
    rogue_t1 = OrbitalState(rogue_pos_t1, rogue_vel_t1, epoch=horizon)
    rogue_t0 = kepler_propagate(rogue_t1, -horizon, mu_grav)

    return ConjunctionScenario(
        rogue_mean=rogue_t0,
        assets=(asset_lead, asset_trail),
        horizon=horizon,
        mu_grav=mu_grav,
    )


def _rotate_about_axis(vec: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of ``vec`` by ``angle`` radians about a unit axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return (vec * math.cos(angle)
            + np.cross(axis, vec) * math.sin(angle)
            + axis * np.dot(axis, vec) * (1.0 - math.cos(angle)))


def make_conjunction(scenario: ConjunctionScenario,
                     reference: float | None = None) -> RareEventProblem:
    """Close-approach probability as a 6-D rare-event problem.

    The random vector is the rogue object's Cartesian position/velocity
    perturbation at the initial epoch.  Performance is the negated minimum
    distance to the assets at the close-approach epoch, so the within-
    threshold event is the exceedance {S >= -miss_threshold}.
    """
    mu = scenario.mu_grav
    asset_positions = np.stack([
        kepler_propagate(asset, scenario.horizon, mu).position
        for asset in scenario.assets
    ])
    mean_pos = scenario.rogue_mean.position
    mean_vel = scenario.rogue_mean.velocity
    sigmas = np.array([scenario.rogue_pos_sigma] * 3 + [scenario.rogue_vel_sigma] * 3)

    def perf(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r, _ = propagate_batch(mean_pos + x[:, :3], mean_vel + x[:, 3:], scenario.horizon, mu)
        dists = np.linalg.norm(r[:, None, :] - asset_positions[None, :, :], axis=2)
        return -dists.min(axis=1)

    return RareEventProblem(
        dim=6,
        base=GaussianParams(np.zeros(6), np.diag(sigmas**2)),
        performance=perf,
        gamma=-scenario.miss_threshold,
        description="conjunction: close approach of a rogue object to two coplanar assets",
        reference=reference,
    )
