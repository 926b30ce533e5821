"""Static figure emission for gait studies.

Everything here renders to SVG files through the Agg backend so the
package stays usable on headless boxes, and the files are written with a
pinned hash salt and no timestamp metadata so re-running a report on the
same data produces byte-identical output (useful for diffing artifacts
between runs).
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import JOINT_NAMES

# Pinned so SVG element ids do not depend on process state.
_HASHSALT = "gaitopt"

GAIT_LABELS = {
    "pronk": "PF",
    "bound_extended": "BE",
    "bound_gathered": "BG",
    "bound_double_flight": "B2",
}
GAIT_COLORS = {
    "pronk": "tab:blue",
    "bound_extended": "tab:orange",
    "bound_gathered": "tab:green",
    "bound_double_flight": "tab:red",
}


def _label(gait_name):
    return GAIT_LABELS.get(gait_name, gait_name)


def _color(gait_name):
    return GAIT_COLORS.get(gait_name, "tab:gray")


def save_figure(fig, path):
    """Write ``fig`` to ``path`` as deterministic SVG and close it."""
    with plt.rc_context({"svg.hashsalt": _HASHSALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def speed_curves(rows, path):
    """Three-panel summary of a sweep: COT, duty factor, stride time vs speed.

    ``rows`` are flat metric dicts (one per solved speed, any mix of gaits),
    as produced by ``GaitMetrics.as_row`` or read back from a metrics CSV.
    """
    by_gait = {}
    for r in rows:
        by_gait.setdefault(r["gait"], []).append(r)

    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    panels = [("cost_of_transport", "cost of transport"),
              ("duty_factor", "duty factor"),
              ("stride_time", "stride time [s]")]
    for ax, (key, label) in zip(axes, panels):
        for gait in sorted(by_gait):
            rs = sorted(by_gait[gait], key=lambda r: float(r["speed"]))
            v = [float(r["speed"]) for r in rs]
            y = [float(r[key]) for r in rs]
            ax.plot(v, y, "o-", ms=3.5, lw=1.2, color=_color(gait),
                    label=_label(gait))
        ax.set_xlabel("average speed [m/s]")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    return save_figure(fig, path)


def joint_work_bars(metrics_list, path):
    """Grouped bars of positive mechanical work per joint, one group per speed.

    Takes ``GaitMetrics`` objects (typically the same gait at a few speeds)
    and splits each joint's bar into stance and swing contributions.
    """
    if not metrics_list:
        raise ValueError("no metrics to plot")
    metrics_list = sorted(metrics_list, key=lambda m: m.speed)
    n_speed = len(metrics_list)
    x = np.arange(len(JOINT_NAMES))
    width = 0.8 / n_speed

    fig, ax = plt.subplots(figsize=(7, 3.6))
    for i, m in enumerate(metrics_list):
        stance = [m.work_by_joint.get((j, "stance"), None) for j in JOINT_NAMES]
        swing = [m.work_by_joint.get((j, "swing"), None) for j in JOINT_NAMES]
        st = np.array([w.positive if w else 0.0 for w in stance])
        sw = np.array([w.positive if w else 0.0 for w in swing])
        pos = x - 0.4 + (i + 0.5) * width
        ax.bar(pos, st, width * 0.92, label=f"{m.speed:g} m/s stance")
        ax.bar(pos, sw, width * 0.92, bottom=st, alpha=0.45,
               label=f"{m.speed:g} m/s swing")
    ax.set_xticks(x)
    ax.set_xticklabels([j.replace("_", " ") for j in JOINT_NAMES])
    ax.set_ylabel("positive work per stride [J]")
    ax.set_title(f"{_label(metrics_list[0].gait)} joint work")
    ax.grid(axis="y", alpha=0.3)
    ax.legend(fontsize=7, ncol=n_speed)
    fig.tight_layout()
    return save_figure(fig, path)


def momentum_traces(t, groups, path, title="", boundaries=()):
    """Angular-momentum time histories for torso / front legs / rear legs.

    ``groups`` maps group name to a trace sampled at ``t`` (the output of
    ``analysis.momentum_trace``).  ``boundaries`` marks domain switch times.
    """
    order = ["torso", "front_legs", "rear_legs", "total"]
    fig, ax = plt.subplots(figsize=(7, 3.4))
    for name in order:
        if name not in groups:
            continue
        style = dict(lw=1.8, color="k") if name == "total" else dict(lw=1.2)
        ax.plot(t, groups[name], label=name.replace("_", " "), **style)
    for tb in boundaries:
        ax.axvline(tb, color="gray", lw=0.6, ls=":")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("angular momentum about COM [kg m^2/s]")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return save_figure(fig, path)


def gait_tiles(solution, gait, path, title=""):
    """Small-multiple time histories of one solved gait.

    Four tiles: base height and pitch, joint angles, joint torques, and
    vertical contact forces, with domain boundaries marked.
    """
    fig, axes = plt.subplots(2, 2, figsize=(9, 5.6), sharex=True)
    t0 = 0.0
    bounds = []
    force_color = {}
    for d, traj in enumerate(solution.domains):
        n = traj.q.shape[0]
        t = t0 + np.linspace(0.0, traj.duration, n)
        axes[0, 0].plot(t, traj.q[:, 1], "tab:blue")
        axes[0, 0].plot(t, traj.q[:, 2], "tab:orange")
        for j in range(4):
            axes[0, 1].plot(t, traj.q[:, 3 + j], f"C{j}")
            axes[1, 0].plot(t, traj.tau[:, j], f"C{j}")
        legs = gait.domains[d].contacts
        for i, leg in enumerate(legs):
            key = getattr(leg, "value", str(leg))
            fresh = key not in force_color
            color = force_color.setdefault(key, f"C{len(force_color)}")
            axes[1, 1].plot(t, traj.lam[:, 2 * i + 1], color=color,
                            label=key if fresh else None)
        t0 += traj.duration
        bounds.append(t0)
    for ax in axes.ravel():
        for tb in bounds[:-1]:
            ax.axvline(tb, color="gray", lw=0.6, ls=":")
        ax.grid(alpha=0.3)
    axes[0, 0].set_ylabel("base z [m] / pitch [rad]")
    axes[0, 1].set_ylabel("joint angle [rad]")
    axes[1, 0].set_ylabel("torque [N m]")
    axes[1, 1].set_ylabel("vertical force [N]")
    if force_color:
        axes[1, 1].legend(fontsize=8)
    axes[1, 0].set_xlabel("time [s]")
    axes[1, 1].set_xlabel("time [s]")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return save_figure(fig, path)
