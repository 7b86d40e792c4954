"""Plot-ready data files derived from finished experiment runs.

No figures are rendered here; every output is a CSV that a plotting tool can
consume directly: density/performance grids for 2-D problems, the adapted
mixture's density grid, the mean-estimate-versus-dimension series for sweep
runs, and short orbital traces around close approach for the conjunction
problem.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .gaussian import GaussianParams, draw, log_density
from .harness import build_problem, build_scenario, derive_seed
from .orbits import propagate_batch
from .problems import RareEventProblem

GRID_HALFWIDTH = 7.0
GRID_POINTS = 141
TRACE_WINDOW = 5.0
TRACE_STEP = 0.5
TRACE_SAMPLES_PER_PROPOSAL = 50
MC_TRACES = 1000
# Dedicated replication index for the plot-data sample stream, far outside
# any realistic replication range.
PLOT_STREAM_REP = 10**9 + 7


def emit_plot_data(from_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Write plot data for one run directory or a directory of run directories.

    Returns the list of files written; an empty directory yields an empty
    list and is not an error.
    """
    from_dir = Path(from_dir)
    out_dir = Path(out_dir) if out_dir is not None else from_dir
    if (from_dir / "manifest.json").exists():
        out_dir.mkdir(parents=True, exist_ok=True)
        return _emit_single(from_dir, out_dir)

    run_dirs = sorted(p.parent for p in from_dir.glob("*/manifest.json"))
    if not run_dirs:
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    sweep_rows = []
    for run in run_dirs:
        manifest = _load_manifest(run)
        summary = _load_summary(run)
        if summary is not None:
            sweep_rows.append((manifest, summary))
        written.extend(_emit_single(run, run))
    if sweep_rows:
        written.append(_emit_mean_vs_dim(sweep_rows, out_dir))
    return written


def _load_manifest(run_dir: Path) -> dict:
    return json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))


def _load_summary(run_dir: Path) -> dict | None:
    path = run_dir / "summary.csv"
    if not path.exists():
        return None
    with path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    return rows[0] if rows else None


def _load_final_proposals(run_dir: Path) -> list[GaussianParams] | None:
    path = run_dir / "final_proposals.json"
    if not path.exists():
        return None
    payload = json.loads(path.read_text(encoding="utf-8"))
    return [GaussianParams(p["mean"], p["cov"]) for p in payload["proposals"]]


def _emit_single(run_dir: Path, out_dir: Path) -> list[Path]:
    manifest = _load_manifest(run_dir)
    problem_name = manifest["problem"]["name"]
    params = dict(manifest["problem"]["params"])
    written: list[Path] = []
    if problem_name == "conjunction":
        written.extend(_emit_conjunction_traces(manifest, run_dir, out_dir))
        return written
    problem = build_problem(problem_name, params)
    if problem.dim == 2:
        written.append(_emit_target_grid(problem, out_dir))
        proposals = _load_final_proposals(run_dir)
        if proposals:
            written.append(_emit_mixture_grid(proposals, out_dir))
    return written


def _grid_points() -> tuple[np.ndarray, np.ndarray]:
    axis = np.linspace(-GRID_HALFWIDTH, GRID_HALFWIDTH, GRID_POINTS)
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    return axis, np.column_stack([g1.ravel(), g2.ravel()])


def _emit_target_grid(problem: RareEventProblem, out_dir: Path) -> Path:
    _, pts = _grid_points()
    log_pi = np.asarray(problem.log_base_density(pts), dtype=float)
    perf = np.asarray(problem.performance(pts), dtype=float)
    path = out_dir / "target_grid.csv"
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["x1", "x2", "log_target_density", "performance"])
        for (x1, x2), lp, s in zip(pts, log_pi, perf):
            writer.writerow([repr(x1), repr(x2), repr(float(lp)), repr(float(s))])
    return path


def _emit_mixture_grid(proposals: list[GaussianParams], out_dir: Path) -> Path:
    from scipy.special import logsumexp

    _, pts = _grid_points()
    log_q = np.stack([np.atleast_1d(log_density(p, pts)) for p in proposals])
    log_mix = logsumexp(log_q, axis=0) - np.log(len(proposals))
    path = out_dir / "mixture_grid.csv"
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["x1", "x2", "log_mixture_density"])
        for (x1, x2), lm in zip(pts, log_mix):
            writer.writerow([repr(x1), repr(x2), repr(float(lm))])
    return path


def _emit_mean_vs_dim(rows, out_dir: Path) -> Path:
    path = out_dir / "mean_vs_dim.csv"
    ordered = sorted(rows, key=lambda mr: (mr[1]["method"], int(mr[1]["D"])))
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["problem", "method", "D", "mean_estimate", "std_error", "reference"])
        for _, summary in ordered:
            writer.writerow([
                summary["problem"], summary["method"], summary["D"],
                summary["mean_estimate"], summary["std_error"], summary["reference"],
            ])
    return path


def _trace_offsets() -> np.ndarray:
    n_steps = int(round(2 * TRACE_WINDOW / TRACE_STEP))
    return -TRACE_WINDOW + TRACE_STEP * np.arange(n_steps + 1)


def _write_traces(path: Path, labels: list[tuple], traces: np.ndarray,
                  offsets: np.ndarray, label_names: list[str]) -> Path:
    """traces: (M, n_offsets, 3) positions; one CSV row per trace."""
    columns = list(label_names)
    for off in offsets:
        for axis in "xyz":
            columns.append(f"{axis}_t{off:+.1f}")
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for label, trace in zip(labels, traces):
            writer.writerow(list(label) + [repr(float(v)) for v in trace.ravel()])
    return path


def _emit_conjunction_traces(manifest: dict, run_dir: Path, out_dir: Path) -> list[Path]:
    params = dict(manifest["problem"]["params"])
    scenario = build_scenario(params)
    mu = scenario.mu_grav
    offsets = _trace_offsets()
    written = []

    asset_pos = np.stack([a.position for a in scenario.assets])
    asset_vel = np.stack([a.velocity for a in scenario.assets])
    asset_traces = _propagate_traces(asset_pos, asset_vel, scenario.horizon, offsets, mu)
    written.append(_write_traces(
        out_dir / "conjunction_traces_assets.csv",
        [(i,) for i in range(len(scenario.assets))], asset_traces, offsets, ["asset"]))

    seed = derive_seed(manifest["run_config"]["seed"], PLOT_STREAM_REP)
    rng = np.random.default_rng(seed)
    sigmas = np.array([scenario.rogue_pos_sigma] * 3 + [scenario.rogue_vel_sigma] * 3)
    base = GaussianParams(np.zeros(6), np.diag(sigmas**2))

    proposals = _load_final_proposals(run_dir)
    if proposals:
        labels = []
        perturbations = []
        for n, proposal in enumerate(proposals):
            x = draw(proposal, rng, TRACE_SAMPLES_PER_PROPOSAL)
            perturbations.append(x)
            labels.extend((n, k) for k in range(TRACE_SAMPLES_PER_PROPOSAL))
        x = np.vstack(perturbations)
        traces = _propagate_traces(scenario.rogue_mean.position + x[:, :3],
                                   scenario.rogue_mean.velocity + x[:, 3:],
                                   scenario.horizon, offsets, mu)
        written.append(_write_traces(
            out_dir / "conjunction_traces_proposals.csv",
            labels, traces, offsets, ["proposal", "sample"]))

    x = draw(base, rng, MC_TRACES)
    traces = _propagate_traces(scenario.rogue_mean.position + x[:, :3],
                               scenario.rogue_mean.velocity + x[:, 3:],
                               scenario.horizon, offsets, mu)
    written.append(_write_traces(
        out_dir / "conjunction_traces_mc.csv",
        [(k,) for k in range(MC_TRACES)], traces, offsets, ["sample"]))
    return written


def _propagate_traces(positions, velocities, horizon, offsets, mu) -> np.ndarray:
    out = np.empty((positions.shape[0], offsets.size, 3))
    for j, off in enumerate(offsets):
        r, _ = propagate_batch(positions, velocities, horizon + off, mu)
        out[:, j, :] = r
    return out
