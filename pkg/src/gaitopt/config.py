"""Layered run configuration: built-in defaults, config file, CLI flags.

The built-in defaults live in ``data/default_config.yaml`` (which doubles
as the documentation of every knob).  ``load_config`` overlays an optional
user file on those defaults, and ``apply_overrides`` folds in whatever the
command line supplied, so precedence is CLI > file > built-in.
"""

import copy
import logging
import os
from importlib import resources

import yaml

log = logging.getLogger(__name__)

LOG_ENV_VAR = "GAITOPT_LOG"


def builtin_defaults() -> dict:
    text = resources.files("gaitopt.data").joinpath("default_config.yaml").read_text()
    return yaml.safe_load(text)


def _deep_merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in (extra or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None) -> dict:
    """Built-in defaults, optionally overlaid with a user YAML file."""
    cfg = builtin_defaults()
    if path is not None:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ValueError(f"config file {path} must hold a mapping")
        unknown = set(user) - set(cfg)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = _deep_merge(cfg, user)
    return cfg


def apply_overrides(cfg: dict, overrides: dict) -> dict:
    """Overlay dotted-key CLI overrides (``None`` values are skipped)."""
    out = copy.deepcopy(cfg)
    for dotted, val in overrides.items():
        if val is None:
            continue
        node = out
        *parents, leaf = dotted.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = val
    return out


def configure_logging(cfg: dict):
    """Set the root package log level: env var beats the config value."""
    name = os.environ.get(LOG_ENV_VAR, str(cfg.get("log_level", "info")))
    level = getattr(logging, name.upper(), None)
    if not isinstance(level, int):
        log.warning("unknown log level %r, using INFO", name)
        level = logging.INFO
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)-7s %(name)s: %(message)s")
    logging.getLogger("gaitopt").setLevel(level)
    return level


def solve_options_from(cfg: dict):
    """Build pipeline options for one gait solve out of a config tree."""
    from .solver import SolverOptions
    from .sweep import GaitSolveOptions
    from .transcription import TranscriptionOptions

    s = cfg.get("solver", {})
    t = cfg.get("transcription", {})
    budget = s.get("time_budget")
    solver = SolverOptions(
        backend=str(s.get("backend", "ip")),
        tol_feas=float(s.get("feasibility_tol", 1e-7)),
        polish_max_nfev=120,
        ip_maxiter=int(s.get("max_iterations", 8000)),
        time_budget=None if budget in (None, "null") else float(budget),
    )
    return GaitSolveOptions(
        transcription=TranscriptionOptions(nodes=int(t.get("intervals", 10))),
        solver=solver,
        restarts=int(s.get("restarts", 2)),
        restart_noise=float(s.get("restart_noise", 0.05)),
        seed=int(s.get("seed", 0)),
        feas_target=float(s.get("feasibility_tol", 1e-7)),
    )
