"""Matplotlib rendering of run outputs, written next to the CSV files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "apply_style",
    "save_figure",
    "fidelity_sweep_figure",
    "pulse_figure",
    "trajectory_figure",
    "tomography_figure",
    "error_study_figure",
]


def apply_style() -> None:
    plt.rcParams.update(
        {
            "figure.figsize": (6.4, 4.2),
            "font.size": 10,
            "axes.grid": True,
            "grid.alpha": 0.3,
            "lines.linewidth": 1.4,
            "legend.frameon": False,
            "savefig.dpi": 150,
        }
    )


def save_figure(fig, path: str) -> str:
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def fidelity_sweep_figure(curves: dict, xlabel: str = "s = t/T"):
    """One fidelity curve per labeled sweep entry, x normalized to [0, 1]."""
    apply_style()
    fig, ax = plt.subplots()
    for label, (times, fidelities) in sorted(curves.items()):
        span = times[-1] if times[-1] > 0 else 1.0
        ax.plot(np.asarray(times) / span, fidelities, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("fidelity")
    ax.set_ylim(None, 1.005)
    ax.legend()
    return fig


def pulse_figure(pulse, max_time: float = 100.0):
    """Drive envelopes over the first stretch of a pulse."""
    apply_style()
    fig, ax = plt.subplots()
    times = np.arange(pulse.samples) / pulse.sample_rate
    keep = times <= max_time
    labels = ("I1", "Q1", "I2", "Q2")
    for row, label in zip(pulse.channels, labels):
        ax.plot(times[keep], row[keep], label=label)
    ax.set_xlabel("t (ns)")
    ax.set_ylabel("amplitude (MHz)")
    ax.legend(ncol=4)
    return fig


def trajectory_figure(trajectories: dict):
    """Fidelity and energy panels for device runs, one curve per label."""
    apply_style()
    fig, (ax_f, ax_e) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 6.0))
    for label, traj in sorted(trajectories.items()):
        span = traj.step_times[-1] if traj.step_times[-1] > 0 else 1.0
        s = traj.step_times / span
        ax_f.plot(s, traj.fidelities, label=label)
        ax_e.plot(s, traj.energies, label=label)
    ax_f.set_ylabel("fidelity")
    ax_e.set_ylabel("energy")
    ax_e.set_xlabel("s = t/T")
    ax_f.legend()
    return fig


def tomography_figure(times, fid_exact, fid_est, en_exact, en_est):
    apply_style()
    fig, (ax_f, ax_e) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 6.0))
    span = times[-1] if times[-1] > 0 else 1.0
    s = np.asarray(times) / span
    ax_f.plot(s, fid_exact, label="exact")
    ax_f.plot(s, fid_est, "o", ms=3, label="sampled")
    ax_e.plot(s, en_exact, label="exact")
    ax_e.plot(s, en_est, "o", ms=3, label="sampled")
    ax_f.set_ylabel("fidelity")
    ax_e.set_ylabel("energy")
    ax_e.set_xlabel("s = t/T")
    ax_f.legend()
    return fig


def error_study_figure(tables: dict):
    """log-log mean deviation vs shots, one curve per model label."""
    apply_style()
    fig, ax = plt.subplots()
    for label, rows in sorted(tables.items()):
        ns = [r[0] for r in rows]
        devs = [r[1] for r in rows]
        ax.loglog(ns, devs, "o-", label=label)
    ax.set_xlabel("shots")
    ax.set_ylabel("mean deviation from 1/4")
    ax.legend()
    return fig
