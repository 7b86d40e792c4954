"""Exact two-body orbital propagation via universal variables.

The universal anomaly formulation handles elliptic and hyperbolic orbits with
one equation.  The root solve is a vectorized Newton iteration; elements that
fail to converge are retried with a bracketing safeguarded scalar solve (the
time-of-flight function is monotone in the universal anomaly, so a bracket
always exists).  All quantities are SI (meters, seconds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence

_MAX_NEWTON = 50
# Contractual residual bound, relative to sqrt(mu)*|dt|; the solver normally
# lands near machine precision, which full-period round-trip tests rely on.
_RESIDUAL_RTOL = 1e-10
_STEP_RTOL = 1e-14


@dataclass
class OrbitalState:
    """Cartesian position (m), velocity (m/s), and epoch (s) of one object."""

    position: np.ndarray
    velocity: np.ndarray
    epoch: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("state entries must be finite")
        if np.linalg.norm(self.position) == 0.0:
            raise ValueError("position magnitude must be positive")


def stumpff(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stumpff functions C(z) and S(z), series-expanded near zero."""
    z = np.asarray(z, dtype=float)
    c = np.empty_like(z)
    s = np.empty_like(z)
    small = np.abs(z) < 1e-6
    pos = z >= 1e-6
    neg = z <= -1e-6
    zp = z[pos]
    rt = np.sqrt(zp)
    c[pos] = (1.0 - np.cos(rt)) / zp
    s[pos] = (rt - np.sin(rt)) / (zp * rt)
    zn = z[neg]
    rtn = np.sqrt(-zn)
    c[neg] = (np.cosh(rtn) - 1.0) / (-zn)
    s[neg] = (np.sinh(rtn) - rtn) / (-zn * rtn)
    zs = z[small]
    c[small] = 0.5 - zs / 24.0 + zs**2 / 720.0 - zs**3 / 40320.0
    s[small] = 1.0 / 6.0 - zs / 120.0 + zs**2 / 5040.0 - zs**3 / 362880.0
    return c, s


def _tof_terms(chi, r0, vr0_term, alpha, sqrt_mu):
    """Time-of-flight function sqrt(mu)*t(chi) and its derivative (= radius)."""
    z = alpha * chi * chi
    c, s = stumpff(z)
    chi2 = chi * chi
    f = vr0_term * chi2 * c + (1.0 - alpha * r0) * chi2 * chi * s + r0 * chi
    fp = vr0_term * chi * (1.0 - z * s) + (1.0 - alpha * r0) * chi2 * c + r0
    return f, fp


def _initial_chi(r0, vr0, alpha, dt, mu, sqrt_mu):
    """Standard starting guesses per orbit regime (vectorized)."""
    chi = np.where(
        np.abs(alpha) * r0 > 1e-10,
        sqrt_mu * np.abs(alpha) * dt,
        sqrt_mu * dt / r0,
    )
    hyper = alpha < 0
    if np.any(hyper):
        a = 1.0 / alpha[hyper]
        sign = math.copysign(1.0, dt)
        num = -2.0 * mu * alpha[hyper] * dt
        den = (r0[hyper] * vr0[hyper]
               + sign * np.sqrt(-mu * a) * (1.0 - r0[hyper] * alpha[hyper]))
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = num / den
            guess = sign * np.sqrt(-a) * np.log(arg)
        bad = ~np.isfinite(guess)
        guess[bad] = (sqrt_mu * dt / r0[hyper])[bad]
        chi[hyper] = guess
    return chi


def _solve_scalar_safeguarded(r0, vr0_term, alpha, target, sqrt_mu, chi0):
    """Bracketing Newton/bisection hybrid for one stubborn element."""
    def residual(chi):
        f, fp = _tof_terms(np.array([chi]), r0, vr0_term, alpha, sqrt_mu)
        return float(f[0]) - target, float(fp[0])

    step = max(abs(chi0), 1.0)
    lo, hi = chi0 - step, chi0 + step
    flo, _ = residual(lo)
    fhi, _ = residual(hi)
    for _ in range(200):
        if flo <= 0.0 <= fhi:
            break
        step *= 2.0
        if flo > 0.0:
            lo -= step
            flo, _ = residual(lo)
        if fhi < 0.0:
            hi += step
            fhi, _ = residual(hi)
    else:
        raise NoConvergence("failed to bracket the universal anomaly")

    chi = min(max(chi0, lo), hi)
    for _ in range(200):
        f, fp = residual(chi)
        if f <= 0.0:
            lo = chi
        else:
            hi = chi
        if fp > 0.0:
            nxt = chi - f / fp
        else:
            nxt = 0.5 * (lo + hi)
        if not lo <= nxt <= hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - chi) <= _STEP_RTOL * (abs(nxt) + 1.0):
            return nxt
        chi = nxt
    return chi


def propagate_batch(positions: np.ndarray, velocities: np.ndarray, dt: float,
                    mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Propagate M states by the same time offset; returns new (M, 3) arrays."""
    r_vec = np.atleast_2d(np.asarray(positions, dtype=float))
    v_vec = np.atleast_2d(np.asarray(velocities, dtype=float))
    if r_vec.shape != v_vec.shape or r_vec.shape[1] != 3:
        raise ValueError("positions and velocities must both have shape (M, 3)")
    if not np.isfinite(dt):
        raise ValueError("dt must be finite")
    if dt == 0.0:
        return r_vec.copy(), v_vec.copy()

    sqrt_mu = math.sqrt(mu)
    r0 = np.linalg.norm(r_vec, axis=1)
    if np.any(r0 == 0.0):
        raise ValueError("zero-radius state cannot be propagated")
    vr0 = np.sum(r_vec * v_vec, axis=1) / r0
    v2 = np.sum(v_vec * v_vec, axis=1)
    alpha = 2.0 / r0 - v2 / mu
    vr0_term = r0 * vr0 / sqrt_mu
    target = sqrt_mu * dt

    chi = _initial_chi(r0, vr0, alpha, dt, mu, sqrt_mu)
    chi_scale = np.abs(chi) + 1.0
    converged = np.zeros(r0.shape, dtype=bool)
    for _ in range(_MAX_NEWTON):
        f, fp = _tof_terms(chi, r0, vr0_term, alpha, sqrt_mu)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (f - target) / fp
        step = np.where(np.isfinite(step), step, 0.0)
        chi = chi - step
        converged = np.abs(step) <= _STEP_RTOL * (np.abs(chi) + chi_scale)
        if np.all(converged):
            break

    residual_tol = _RESIDUAL_RTOL * abs(target)
    f, _ = _tof_terms(chi, r0, vr0_term, alpha, sqrt_mu)
    stubborn = np.flatnonzero(~converged | (np.abs(f - target) > residual_tol))
    for i in stubborn:
        chi[i] = _solve_scalar_safeguarded(
            r0[i], vr0_term[i], alpha[i], target, sqrt_mu,
            _initial_chi(r0[i:i + 1], vr0[i:i + 1], alpha[i:i + 1], dt, mu, sqrt_mu)[0],
        )
        fi, _ = _tof_terms(chi[i:i + 1], r0[i:i + 1], vr0_term[i:i + 1], alpha[i:i + 1], sqrt_mu)
        if abs(float(fi[0]) - target) > residual_tol:
            raise NoConvergence(
                f"universal Kepler solve failed for state {i} (dt={dt:.6g})"
            )

    z = alpha * chi * chi
    c, s = stumpff(z)
    chi2 = chi * chi
    f_lag = 1.0 - chi2 * c / r0
    g_lag = dt - chi2 * chi * s / sqrt_mu
    new_r = f_lag[:, None] * r_vec + g_lag[:, None] * v_vec
    rn = np.linalg.norm(new_r, axis=1)
    fdot = sqrt_mu / (rn * r0) * chi * (z * s - 1.0)
    gdot = 1.0 - chi2 * c / rn
    new_v = fdot[:, None] * r_vec + gdot[:, None] * v_vec
    return new_r, new_v


def kepler_propagate(state: OrbitalState, dt: float, mu_grav: float) -> OrbitalState:
    """Propagate one state by ``dt`` seconds under an inverse-square field."""
    new_r, new_v = propagate_batch(state.position[None, :], state.velocity[None, :], dt, mu_grav)
    return OrbitalState(new_r[0], new_v[0], epoch=state.epoch + dt)


def specific_energy(position, velocity, mu: float) -> float:
    """v^2/2 - mu/r, conserved along any two-body trajectory."""
    r = np.linalg.norm(np.asarray(position, dtype=float))
    v2 = float(np.dot(velocity, velocity))
    return 0.5 * v2 - mu / r


def angular_momentum(position, velocity) -> np.ndarray:
    """r x v, conserved along any two-body trajectory."""
    return np.cross(np.asarray(position, dtype=float), np.asarray(velocity, dtype=float))


def circular_state(radius: float, mu: float, phase: float, epoch: float = 0.0) -> OrbitalState:
    """Prograde circular equatorial orbit at the given phase angle (radians)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    speed = math.sqrt(mu / radius)
    pos = radius * np.array([math.cos(phase), math.sin(phase), 0.0])
    vel = speed * np.array([-math.sin(phase), math.cos(phase), 0.0])
    return OrbitalState(pos, vel, epoch=epoch)


def orbital_period(state: OrbitalState, mu: float) -> float:
    """Period of a bound orbit from the vis-viva energy."""
    energy = specific_energy(state.position, state.velocity, mu)
    if energy >= 0:
        raise ValueError("orbit is not bound")
    a = -mu / (2.0 * energy)
    return 2.0 * math.pi * math.sqrt(a**3 / mu)
