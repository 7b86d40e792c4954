"""Experiment driver: problem/method registries, seeded replication, CSV output.

Replication r of an experiment derives its own 64-bit seed by hashing
(master_seed, r), so runs are reproducible, replications are independent,
and execution order (including thread scheduling) cannot change the results.
Wall-clock timings are written to a separate ``timings.csv`` so the result
files are byte-identical across repeated runs of the same spec.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .cepmc import RunConfig, run_cepmc
from .config import ExperimentSpec
from .cross_entropy import run_ce
from .errors import CepmcError, ConfigError
from .estimation import rrmse, run_plain_mc
from .gaussian import GaussianParams
from .pmc_baselines import run_gr_pmc, run_lr_pmc
from .problems import (
    ConjunctionScenario,
    RareEventProblem,
    default_conjunction_scenario,
    make_conjunction,
    make_s1,
    make_s2,
    make_s3,
    make_s4,
)
from .orbits import OrbitalState

RESULT_COLUMNS = [
    "experiment_id", "method", "problem", "D", "N", "K", "T", "rho",
    "rep", "seed", "estimate", "estimate_clamped", "reference", "ess_final", "error",
]

SUMMARY_COLUMNS = [
    "experiment_id", "method", "problem", "D", "N", "K", "T", "rho",
    "replications", "n_errors", "mean_estimate", "std_error", "rrmse", "reference",
]

METHOD_DESCRIPTIONS = {
    "cepmc": "population cross-entropy with DM weights and per-proposal updates",
    "ce": "single-proposal multilevel cross-entropy (T acts as the iteration cap)",
    "lr_pmc": "local-resampling PMC baseline (fixed covariances)",
    "gr_pmc": "global-resampling PMC baseline (fixed covariances)",
    "plain_mc": "plain Monte Carlo from the base density (N*K*T samples)",
}

PROBLEM_DESCRIPTIONS = {
    "s1": "2-D structural limit state, parabolic (params: variant=squared|linear)",
    "s2": "2-D structural limit state, shallow parabola (params: variant=squared|linear)",
    "s3": "2-D four-branch series system",
    "s4": "D-dimensional sum exceedance (params: beta, dim)",
    "conjunction": "6-D orbital close-approach probability (params: scenario fields)",
}


def derive_seed(master_seed: int, rep: int) -> int:
    """Stable 64-bit replication seed from (master_seed, rep)."""
    data = struct.pack("<QQ", master_seed & 0xFFFFFFFFFFFFFFFF, rep & 0xFFFFFFFFFFFFFFFF)
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def latin_hypercube_init(n_points: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Centered Latin hypercube on [-1, 1]^dim, one point per stratum.

    Stratum centers (i + 0.5)/n are permuted independently per dimension and
    affinely mapped to [-1, 1]; with n_points=4 every coordinate lands in
    {-0.75, -0.25, 0.25, 0.75}.
    """
    if n_points < 1 or dim < 1:
        raise ValueError("n_points and dim must be >= 1")
    centers = (np.arange(n_points) + 0.5) / n_points
    unit = np.empty((n_points, dim))
    for d in range(dim):
        unit[:, d] = centers[rng.permutation(n_points)]
    return 2.0 * unit - 1.0


def build_problem(name: str, params: dict | None = None) -> RareEventProblem:
    """Instantiate a registered problem; ``params`` values may be strings."""
    params = dict(params or {})
    reference = params.pop("reference", None)
    name = name.lower()
    if name == "s1":
        problem = make_s1(variant=str(params.pop("variant", "squared")))
    elif name == "s2":
        problem = make_s2(variant=str(params.pop("variant", "squared")))
    elif name == "s3":
        problem = make_s3()
    elif name == "s4":
        problem = make_s4(beta=float(params.pop("beta", 5.0)),
                          dim=int(params.pop("dim", 2)))
    elif name == "conjunction":
        problem = make_conjunction(build_scenario(params))
        params.clear()
    else:
        raise ConfigError(f"unknown problem {name!r}; expected one of {sorted(PROBLEM_DESCRIPTIONS)}")
    if params:
        raise ConfigError(f"unused problem parameters for {name!r}: {sorted(params)}")
    if reference is not None:
        problem.reference = float(reference)
    return problem


def _state_from(params: dict, prefix: str) -> OrbitalState:
    try:
        pos = params.pop(f"{prefix}.position")
        vel = params.pop(f"{prefix}.velocity")
    except KeyError as exc:
        raise ConfigError(f"scenario field {exc.args[0]!r} is required") from exc
    epoch = float(params.pop(f"{prefix}.epoch", 0.0))
    return OrbitalState(_floats(pos), _floats(vel), epoch=epoch)


def _floats(value) -> np.ndarray:
    if isinstance(value, str):
        return np.array([float(tok) for tok in value.split(",")])
    return np.asarray(value, dtype=float)


def build_scenario(params: dict) -> ConjunctionScenario:
    """Scenario from config keys; anything not given falls back to the default
    crossing geometry."""
    explicit = any(k.startswith(("rogue_mean.", "assets.")) for k in params)
    scalars = {
        key: float(params.pop(key))
        for key in ("rogue_pos_sigma", "rogue_vel_sigma", "miss_threshold")
        if key in params
    }
    if explicit:
        rogue = _state_from(params, "rogue_mean")
        assets = (_state_from(params, "assets.0"), _state_from(params, "assets.1"))
        return ConjunctionScenario(
            rogue_mean=rogue,
            assets=assets,
            horizon=float(params.pop("horizon", 9893.34)),
            mu_grav=float(params.pop("mu_grav", 3.986004418e14)),
            **scalars,
        )
    builder = {
        key: float(params.pop(key))
        for key in ("orbit_radius", "offset_m", "crossing_angle_deg", "horizon", "mu_grav")
        if key in params
    }
    scenario = default_conjunction_scenario(**builder)
    return replace(scenario, **scalars) if scalars else scenario


def build_init(spec: ExperimentSpec, problem: RareEventProblem,
               rng: np.random.Generator) -> list[GaussianParams]:
    """Initial proposal parameters for one replication (consumes the stream).

    Schemes are expressed relative to the problem's base density, so for the
    standardized problems (base = standard normal) ``standard_normal`` draws
    means from N(0, I), ``latin_hypercube_pm`` places them on a centered
    Latin hypercube in [-1, 1]^D, and covariances are init_sigma^2 * I.  For
    problems with a non-identity base covariance the same constructions are
    scaled by the base density's marginal scales.
    """
    from .gaussian import draw as draw_gaussian

    n = spec.run_config.n_proposals
    dim = problem.dim
    base = problem.base
    cov = spec.init_sigma**2 * base.cov
    if spec.init_scheme == "standard_normal":
        means = draw_gaussian(base, rng, n)
    elif spec.init_scheme == "latin_hypercube_pm":
        unit = latin_hypercube_init(n, dim, rng)
        means = base.mean + unit * np.sqrt(np.diag(base.cov))
    else:
        means = np.asarray(spec.init_means, dtype=float)
        if means.shape != (n, dim):
            raise ConfigError(f"init_means shape {means.shape} does not match (N={n}, D={dim})")
    return [GaussianParams(m, cov) for m in means]


def _run_replication(spec: ExperimentSpec, problem: RareEventProblem, rep: int):
    cfg = spec.run_config
    seed = derive_seed(cfg.seed, rep)
    rng = np.random.default_rng(seed)
    started = time.perf_counter()
    result = None
    error = ""
    try:
        if spec.method == "plain_mc":
            total = cfg.n_proposals * cfg.samples_per_proposal * cfg.trials
            result = run_plain_mc(problem, total, rng, seed=seed)
        elif spec.method == "ce":
            init = build_init(spec, problem, rng)
            result, _ = run_ce(problem, cfg.rho, cfg.samples_per_proposal,
                               cfg.trials, init[0], rng,
                               cov_schedule_start=cfg.cov_schedule_start, seed=seed)
        else:
            init = build_init(spec, problem, rng)
            runner = {"cepmc": run_cepmc, "lr_pmc": run_lr_pmc, "gr_pmc": run_gr_pmc}[spec.method]
            result, _ = runner(problem, cfg, init, rng, seed=seed)
    except CepmcError as exc:
        error = f"{type(exc).__name__}: {exc}"
    runtime_ms = (time.perf_counter() - started) * 1e3

    row = {
        "experiment_id": spec.experiment_id,
        "method": spec.method,
        "problem": spec.problem_name,
        "D": problem.dim,
        "N": cfg.n_proposals,
        "K": cfg.samples_per_proposal,
        "T": cfg.trials,
        "rho": repr(cfg.rho),
        "rep": rep,
        "seed": seed,
        "estimate": "" if result is None else repr(result.estimate),
        "estimate_clamped": "" if result is None else repr(min(max(result.estimate, 0.0), 1.0)),
        "reference": "" if problem.reference is None else repr(problem.reference),
        "ess_final": "" if result is None else repr(result.n_effective),
        "error": error,
    }
    return row, runtime_ms, result


@dataclass
class ExperimentOutputs:
    """Paths and aggregates produced by one run_experiment call."""

    out_dir: Path
    results_path: Path
    summary_path: Path
    timings_path: Path
    manifest_path: Path
    estimates: np.ndarray
    summary: dict


def run_experiment(spec: ExperimentSpec) -> ExperimentOutputs:
    """Execute all replications of a spec and write the output files.

    results.csv, summary.csv, and manifest.json are deterministic for a
    fixed spec and master seed; timings.csv carries the wall-clock numbers.
    """
    problem = build_problem(spec.problem_name, dict(spec.problem_params))
    out_dir = spec.out_dir if spec.out_dir is not None else Path("runs") / spec.experiment_id
    out_dir.mkdir(parents=True, exist_ok=True)

    reps = range(spec.replications)
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            outcomes = list(pool.map(lambda r: _run_replication(spec, problem, r), reps))
    else:
        outcomes = [_run_replication(spec, problem, r) for r in reps]

    rows = [row for row, _, _ in outcomes]
    runtimes = [rt for _, rt, _ in outcomes]
    results = [res for _, _, res in outcomes]

    results_path = out_dir / "results.csv"
    _write_csv(results_path, RESULT_COLUMNS, rows)

    estimates = np.array([r.estimate for r in results if r is not None])
    n_errors = sum(1 for r in results if r is None)
    summary = {
        "experiment_id": spec.experiment_id,
        "method": spec.method,
        "problem": spec.problem_name,
        "D": problem.dim,
        "N": spec.run_config.n_proposals,
        "K": spec.run_config.samples_per_proposal,
        "T": spec.run_config.trials,
        "rho": repr(spec.run_config.rho),
        "replications": spec.replications,
        "n_errors": n_errors,
        "mean_estimate": repr(float(estimates.mean())) if estimates.size else "",
        "std_error": (repr(float(estimates.std(ddof=1) / np.sqrt(estimates.size)))
                      if estimates.size > 1 else ""),
        "rrmse": (repr(rrmse(estimates, problem.reference))
                  if estimates.size and problem.reference else ""),
        "reference": "" if problem.reference is None else repr(problem.reference),
    }
    summary_path = out_dir / "summary.csv"
    _write_csv(summary_path, SUMMARY_COLUMNS, [summary])

    timings_path = out_dir / "timings.csv"
    timing_rows = [
        {"experiment_id": spec.experiment_id, "rep": rep, "runtime_ms": repr(rt)}
        for rep, rt in enumerate(runtimes)
    ]
    timing_rows.append({
        "experiment_id": spec.experiment_id,
        "rep": "mean",
        "runtime_ms": repr(float(np.mean(runtimes))),
    })
    _write_csv(timings_path, ["experiment_id", "rep", "runtime_ms"], timing_rows)

    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(_manifest(spec, problem), sort_keys=True, indent=2) + "\n",
                             encoding="utf-8")

    first = results[0] if results else None
    if first is not None and "final_proposals" in first.diagnostics:
        proposals = [
            {"mean": p.mean.tolist(), "cov": p.cov.tolist()}
            for p in first.diagnostics["final_proposals"]
        ]
        payload = {"rep": 0, "proposals": proposals, "level_trace": list(first.level_trace)}
        (out_dir / "final_proposals.json").write_text(
            json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")

    return ExperimentOutputs(
        out_dir=out_dir,
        results_path=results_path,
        summary_path=summary_path,
        timings_path=timings_path,
        manifest_path=manifest_path,
        estimates=estimates,
        summary=summary,
    )


def _manifest(spec: ExperimentSpec, problem: RareEventProblem) -> dict:
    cfg = spec.run_config
    return {
        "experiment_id": spec.experiment_id,
        "problem": {"name": spec.problem_name,
                    "params": {k: str(v) for k, v in spec.problem_params.items()},
                    "dim": problem.dim,
                    "reference": problem.reference},
        "method": spec.method,
        "run_config": {
            "N": cfg.n_proposals, "K": cfg.samples_per_proposal, "T": cfg.trials,
            "rho": cfg.rho, "cov_schedule_start": cfg.cov_schedule_start,
            "seed": cfg.seed, "final_fresh_batch": cfg.final_fresh_batch,
        },
        "replications": spec.replications,
        "init": {"scheme": spec.init_scheme, "sigma": spec.init_sigma,
                 "means": None if spec.init_means is None else np.asarray(spec.init_means).tolist()},
    }


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({col: row.get(col, "") for col in columns})
