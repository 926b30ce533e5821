"""Persistence: gait libraries (JSON) and delimited analysis output (CSV).

A gait library stores solved cycles together with the exact model and grid
they were produced on.  Loading re-evaluates every entry's constraint
residuals on a freshly built transcription; entries that no longer check out
(edited file, changed model) are rejected so downstream analysis never runs
on silently inconsistent data.
"""

import csv
import dataclasses
import json
import logging
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .analysis import GaitMetrics
from .gaits import gait_by_name
from .model import RobotModel
from .transcription import DomainTraj, GaitSolution, Transcription, TranscriptionOptions

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
VALIDATE_TOL = 1e-6

_TUPLE_FIELDS = {"torso_com", "thigh_limits", "calf_limits"}


class LibraryError(ValueError):
    """Corrupt, incompatible or stale gait library content."""


def model_to_dict(model: RobotModel) -> dict:
    out = dataclasses.asdict(model)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


def model_from_dict(data: dict) -> RobotModel:
    kwargs = {k: tuple(v) if k in _TUPLE_FIELDS else v for k, v in data.items()}
    return RobotModel(**kwargs)


def _solution_to_dict(sol: GaitSolution, t_options: TranscriptionOptions) -> dict:
    return {
        "gait": sol.gait_name,
        "speed": sol.speed,
        "status": sol.status,
        "objective": sol.objective,
        "eq_violation": sol.eq_violation,
        "ineq_violation": sol.ineq_violation,
        "options": dataclasses.asdict(t_options),
        "domains": [
            {
                "duration": d.duration,
                "q": np.asarray(d.q).tolist(),
                "v": np.asarray(d.v).tolist(),
                "tau": np.asarray(d.tau).tolist(),
                "lam": np.asarray(d.lam).tolist(),
                "coeffs": np.asarray(d.coeffs).tolist(),
            }
            for d in sol.domains
        ],
    }


def _solution_from_dict(data: dict) -> tuple:
    opts_raw = dict(data["options"])
    for key in ("duration_range", "base_x_range", "base_z_range", "pitch_range",
                "base_vx_range", "base_vz_range", "pitch_rate_range"):
        if key in opts_raw:
            opts_raw[key] = tuple(opts_raw[key])
    t_options = TranscriptionOptions(**opts_raw)
    domains = [
        DomainTraj(
            duration=float(d["duration"]),
            q=np.asarray(d["q"], dtype=float),
            v=np.asarray(d["v"], dtype=float),
            tau=np.asarray(d["tau"], dtype=float),
            lam=np.asarray(d["lam"], dtype=float).reshape(len(d["q"]), -1),
            coeffs=np.asarray(d["coeffs"], dtype=float),
        )
        for d in data["domains"]
    ]
    sol = GaitSolution(
        gait_name=data["gait"], speed=float(data["speed"]), domains=domains,
        objective=float(data["objective"]), eq_violation=float(data["eq_violation"]),
        ineq_violation=float(data["ineq_violation"]), status=data.get("status", ""),
    )
    return sol, t_options


class GaitLibrary:
    """A keyed collection of solved gaits over speeds, tied to one model."""

    def __init__(self, model: RobotModel):
        self.model = model
        self._entries = {}          # (gait_name, round(speed, 6)) -> (solution, options)

    @staticmethod
    def _key(gait_name, speed):
        return (gait_name, round(float(speed), 6))

    def add(self, solution: GaitSolution, t_options: TranscriptionOptions):
        self._entries[self._key(solution.gait_name, solution.speed)] = (solution, t_options)

    def get(self, gait_name, speed) -> GaitSolution:
        return self._entries[self._key(gait_name, speed)][0]

    def __contains__(self, key):
        return self._key(*key) in self._entries

    def __len__(self):
        return len(self._entries)

    def entries(self):
        for (name, speed), (sol, opts) in sorted(self._entries.items()):
            yield name, speed, sol, opts

    def gaits(self):
        return sorted({name for name, _ in self._entries})

    def speeds(self, gait_name):
        return sorted(s for g, s in self._entries if g == gait_name)

    def solutions(self, gait_name):
        return [self.get(gait_name, s) for s in self.speeds(gait_name)]

    # ------------------------------------------------------------------

    def save(self, path):
        doc = {
            "schema": SCHEMA_VERSION,
            "created": datetime.now(timezone.utc).isoformat(),
            "model": model_to_dict(self.model),
            "entries": [_solution_to_dict(sol, opts) for _, _, sol, opts in self.entries()],
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
        return path

    @classmethod
    def load(cls, path, validate: bool = True, tol: float = VALIDATE_TOL) -> "GaitLibrary":
        """Read a library and re-check every entry against its own NLP.

        With ``validate`` the stored trajectories are packed back into a
        rebuilt transcription and their true constraint residuals must stay
        within ``tol``; stale entries raise :class:`LibraryError`.
        """
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("schema") != SCHEMA_VERSION:
            raise LibraryError(f"unsupported library schema {doc.get('schema')!r}")
        model = model_from_dict(doc["model"])
        lib = cls(model)
        for raw in doc["entries"]:
            sol, t_options = _solution_from_dict(raw)
            if validate:
                trans = Transcription(model, gait_by_name(sol.gait_name), t_options)
                z = trans.pack(sol.domains)
                eq = trans.eq_residual(z)
                g = trans.ineq_residual(z)
                viol = max(np.abs(eq).max() if eq.size else 0.0,
                           np.maximum(g, 0.0).max() if g.size else 0.0)
                if viol > tol:
                    raise LibraryError(
                        f"{sol.gait_name} @ {sol.speed} m/s fails revalidation: "
                        f"residual {viol:.3e} > {tol:.1e}")
            lib.add(sol, t_options)
        return lib


# --------------------------------------------------------------------------
# delimited output


def write_metrics_csv(path, metrics_rows):
    """Write GaitMetrics (or plain dict) rows to one CSV table."""
    rows = [m.as_row() if isinstance(m, GaitMetrics) else dict(m) for m in metrics_rows]
    if not rows:
        raise ValueError("no metrics to write")
    header = list(rows[0].keys())
    for r in rows[1:]:
        for k in r:
            if k not in header:
                header.append(k)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, restval="")
        writer.writeheader()
        writer.writerows(rows)
    return path


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]


_Q_COLS = ["x", "z", "pitch", "thigh_f", "calf_f", "thigh_r", "calf_r"]


def write_trajectory_csv(path, solution: GaitSolution):
    """Node trajectories of a solved gait, one sample per row."""
    header = (["domain", "sample", "t"] + [f"q_{c}" for c in _Q_COLS]
              + [f"v_{c}" for c in _Q_COLS]
              + ["tau_thigh_f", "tau_calf_f", "tau_thigh_r", "tau_calf_r"]
              + ["fx_front", "fz_front", "fx_rear", "fz_rear"])
    gait = gait_by_name(solution.gait_name)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        t0 = 0.0
        for d, traj in enumerate(solution.domains):
            n = traj.q.shape[0]
            ts = t0 + np.linspace(0.0, traj.duration, n)
            contacts = gait.domains[d].contacts
            for k in range(n):
                force_cols = {"front": ("", ""), "rear": ("", "")}
                for i, leg in enumerate(contacts):
                    force_cols[leg.value] = (repr(traj.lam[k, 2 * i]),
                                             repr(traj.lam[k, 2 * i + 1]))
                row = ([d, k, repr(float(ts[k]))]
                       + [repr(float(x)) for x in traj.q[k]]
                       + [repr(float(x)) for x in traj.v[k]]
                       + [repr(float(x)) for x in traj.tau[k]]
                       + list(force_cols["front"]) + list(force_cols["rear"]))
                writer.writerow(row)
            t0 += traj.duration
    return path


def write_momentum_csv(path, t, groups):
    """Angular-momentum traces (clockwise positive) to CSV."""
    keys = ["torso", "front_legs", "rear_legs", "total"]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + keys)
        for i in range(len(t)):
            writer.writerow([repr(float(t[i]))] + [repr(float(groups[k][i])) for k in keys])
    return path
