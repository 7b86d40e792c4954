"""Experiment configuration: flat key = value files with sections.

Format: one ``key = value`` per line, ``#`` starts a comment, ``[section]``
headers group problem/method/run keys.  Values are parsed on demand so error
messages can name the offending key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cepmc import RunConfig
from .errors import ConfigError

METHODS = ("cepmc", "ce", "lr_pmc", "gr_pmc", "plain_mc")
INIT_SCHEMES = ("standard_normal", "latin_hypercube_pm", "explicit")


@dataclass
class ExperimentSpec:
    """Everything needed to run one replicated experiment."""

    experiment_id: str
    problem_name: str
    method: str
    run_config: RunConfig
    replications: int
    problem_params: dict = field(default_factory=dict)
    init_scheme: str = "standard_normal"
    init_sigma: float = 1.0
    init_means: np.ndarray | None = None
    out_dir: Path | None = None
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ConfigError(f"unknown init scheme {self.init_scheme!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.init_scheme == "explicit":
            if self.init_means is None:
                raise ConfigError("explicit init requires init_means")
            self.init_means = np.atleast_2d(np.asarray(self.init_means, dtype=float))
            if self.init_means.shape[0] != self.run_config.n_proposals:
                raise ConfigError(
                    f"init_means has {self.init_means.shape[0]} rows, "
                    f"expected N={self.run_config.n_proposals}"
                )
        if self.method == "ce" and self.run_config.n_proposals != 1:
            raise ConfigError("method 'ce' uses a single proposal; set N = 1")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, dict[str, str]]:
    """Parse the key = value format into {section: {key: value}}.

    Keys before any section header land in section ''.
    """
    sections: dict[str, dict[str, str]] = {"": {}}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        sections[current][key] = value.strip()
    return sections


def _get(section: dict, key: str, cast, default=None, required=False, source=""):
    if key not in section or section[key] == "":
        if required:
            raise ConfigError(f"{source}: missing required key {key!r}")
        return default
    try:
        return cast(section[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: bad value for {key!r}: {section[key]!r} ({exc})") from exc


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.split(",") if tok.strip() != ""])


def _parse_means(text: str) -> np.ndarray:
    rows = [_parse_vector(row) for row in text.split(";") if row.strip() != ""]
    if not rows:
        raise ValueError("no vectors given")
    return np.vstack(rows)


def load_experiment_spec(path: str | Path, overrides: dict | None = None) -> ExperimentSpec:
    """Load a spec from a config file, applying CLI overrides if given.

    Recognized override keys: replications, seed, out, threads.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    sections = parse_config_text(text, source=str(path))
    overrides = overrides or {}

    top = sections.get("", {})
    problem = sections.get("problem", {})
    method_sec = sections.get("method", {})
    run = sections.get("run", {})

    experiment_id = top.get("experiment_id") or problem.get("experiment_id")
    if not experiment_id:
        experiment_id = path.stem
    problem_name = _get(problem, "name", str, required=True, source=f"{path} [problem]")
    problem_params = {k: v for k, v in problem.items() if k not in ("name", "reference")}
    reference = _get(problem, "reference", float, source=f"{path} [problem]")
    if reference is not None:
        problem_params["reference"] = reference

    method = _get(method_sec, "name", str, required=True, source=f"{path} [method]")
    src = f"{path} [method]"
    try:
        run_config = RunConfig(
            n_proposals=_get(method_sec, "N", int, default=1, source=src),
            samples_per_proposal=_get(method_sec, "K", int, default=1000, source=src),
            trials=_get(method_sec, "T", int, default=1, source=src),
            rho=_get(method_sec, "rho", float, default=0.1, source=src),
            cov_schedule_start=_get(method_sec, "cov_schedule_start", int, source=src),
            seed=int(overrides.get("seed", _get(run, "seed", int, default=0, source=f"{path} [run]"))),
            final_fresh_batch=_get(method_sec, "final_fresh_batch", _parse_bool,
                                   default=False, source=src),
        )
    except ValueError as exc:
        raise ConfigError(f"{src}: {exc}") from exc

    out = overrides.get("out", run.get("out"))
    spec = ExperimentSpec(
        experiment_id=str(experiment_id),
        problem_name=problem_name,
        method=method,
        run_config=run_config,
        replications=int(overrides.get("replications",
                                       _get(run, "replications", int, default=1,
                                            source=f"{path} [run]"))),
        problem_params=problem_params,
        init_scheme=_get(method_sec, "init", str, default="standard_normal", source=src),
        init_sigma=_get(method_sec, "init_sigma", float, default=1.0, source=src),
        init_means=_get(method_sec, "init_means", _parse_means, source=src),
        out_dir=Path(out) if out else None,
        threads=int(overrides.get("threads",
                                  _get(run, "threads", int, default=1, source=f"{path} [run]"))),
    )
    return spec


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")
