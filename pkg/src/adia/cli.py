"""Command-line experiment runner.

Usage: adia <command> --config path [--seed u64] [--out dir] [--threads k]

Commands: exact-evolve, grape-synth, device-sim, tomography, error-study.
Each writes CSV/JSON artifacts plus rendered figures into the output
directory, and a manifest listing every file.  Exit codes: 0 on success,
2 for configuration problems, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import os
import sys

import numpy as np
import scipy

import matplotlib

from . import __version__, figures
from ._linalg import NumericalError
from .config import (
    DEVICE_PRESETS,
    ExperimentConfig,
    device_from_config,
    load_config,
    preset_device,
)
from .errors import ConfigError
from .spin_system import Schedule, build_ht, spectrum_at
from .propagation import Trajectory, TrotterPlan, evolve_exact, short_time_propagator, trotter_evolve
from .circuits import basis_rotation, build_fidelity_probe, circuit_unitary
from .transmon import embed_target
from .pulse_control import GrapeConfig, optimize
from .open_system import NoiseParams, run_schedule
from . import measurement as meas

__all__ = ["main"]


def _thread_count(arg_value: int | None) -> int:
    if arg_value is not None:
        return max(1, arg_value)
    env = os.environ.get("ADIA_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("ADIA_THREADS must be an integer") from exc
    return 1


def _schedule(cfg: ExperimentConfig) -> Schedule:
    return Schedule(total_time=cfg.total_time, form=cfg.schedule_form)


def _plan(cfg: ExperimentConfig) -> TrotterPlan:
    return TrotterPlan(n=cfg.steps, total_time=cfg.total_time, node_rule=cfg.node_rule)


def _grape_config(cfg: ExperimentConfig, seed: int) -> GrapeConfig:
    return GrapeConfig(
        eps_cut=cfg.eps_cut,
        penalty_exponent=cfg.penalty_exponent,
        chi=cfg.chi,
        max_iterations=cfg.max_iterations,
        target_infidelity=cfg.target_infidelity,
        seed=seed,
        init_amplitude=cfg.init_amplitude,
    )


class _Emitter:
    """Collects artifact files and writes the closing manifest."""

    def __init__(self, out_dir: str, command: str, config_path: str | None, seed: int):
        self.out_dir = out_dir
        self.command = command
        self.seed = seed
        self.files: list = []
        self.config_sha = "defaults"
        if config_path is not None:
            with open(config_path, "rb") as fh:
                self.config_sha = hashlib.sha256(fh.read()).hexdigest()
        os.makedirs(out_dir, exist_ok=True)

    def write_text(self, name: str, text: str) -> str:
        path = os.path.join(self.out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        self.files.append(name)
        return path

    def write_figure(self, name: str, fig) -> str:
        path = os.path.join(self.out_dir, name)
        figures.save_figure(fig, path)
        self.files.append(name)
        return path

    def finish(self) -> None:
        manifest = {
            "command": self.command,
            "config_sha256": self.config_sha,
            "seed": self.seed,
            "versions": {
                "adia": __version__,
                "python": "%d.%d.%d" % sys.version_info[:3],
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "matplotlib": matplotlib.__version__,
            },
            "files": sorted(self.files),
        }
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _propagator_targets(cfg: ExperimentConfig):
    sched = _schedule(cfg)
    plan = _plan(cfg)
    return sched, plan, [
        embed_target(short_time_propagator(sched, plan, k), cfg.levels)
        for k in range(1, plan.n + 1)
    ]


def _synthesize_uniform(cfg: ExperimentConfig, tau: float, seed: int, threads: int):
    """One pulse per short-time propagator at a common duration."""
    _, _, targets = _propagator_targets(cfg)
    device = device_from_config(cfg)
    gcfg = _grape_config(cfg, seed)

    def job(item):
        k, target = item
        return k, optimize(target, tau, device, gcfg)

    results = {}
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            for k, out in pool.map(job, enumerate(targets, start=1)):
                results[k] = out
    else:
        for item in enumerate(targets, start=1):
            k, out = job(item)
            results[k] = out
    return [results[k] for k in sorted(results)]


def cmd_exact_evolve(cfg: ExperimentConfig, emitter: _Emitter, seed: int, threads: int) -> int:
    curves = {}
    for total_time in cfg.total_times:
        sched = Schedule(total_time=float(total_time), form=cfg.schedule_form)
        psi0 = spectrum_at(sched, 0.0).ground()[1]
        traj = evolve_exact(sched, psi0)
        label = "T=%g" % total_time
        emitter.write_text("exact_T%g.csv" % total_time, traj.to_csv())
        curves[label] = (traj.times, traj.fidelities)
    trot_curves = {}
    for steps in cfg.step_counts:
        sched = _schedule(cfg)
        sub_plan = TrotterPlan(n=int(steps), total_time=cfg.total_time, node_rule=cfg.node_rule)
        psi0 = spectrum_at(sched, 0.0).ground()[1]
        traj = trotter_evolve(sched, sub_plan, psi0)
        emitter.write_text("trotter_n%d.csv" % steps, traj.to_csv())
        trot_curves["n=%d" % steps] = (traj.times, traj.fidelities)
    emitter.write_figure("fig_exact_sweep.png", figures.fidelity_sweep_figure(curves))
    emitter.write_figure("fig_trotter_sweep.png", figures.fidelity_sweep_figure(trot_curves))
    return 0


def cmd_grape_synth(cfg: ExperimentConfig, emitter: _Emitter, seed: int, threads: int) -> int:
    all_converged = True
    report: dict = {"taus": {}}
    for tau in cfg.taus:
        tau = float(tau)
        outputs = _synthesize_uniform(cfg, tau, seed, threads)
        entries = []
        for k, (pulse, rep) in enumerate(outputs, start=1):
            emitter.write_text("pulse_tau%g_k%02d.csv" % (tau, k), pulse.to_csv())
            entries.append(
                {
                    "k": k,
                    "iterations": rep.iterations,
                    "infidelity": rep.final_gate_infidelity,
                    "rms_amplitude_mhz": rep.rms_amplitude,
                    "converged": rep.converged,
                    "amplitude_within_drive_limit": rep.amplitude_within_drive_limit,
                }
            )
            all_converged = all_converged and rep.converged
        report["taus"]["%g" % tau] = entries
        emitter.write_figure(
            "fig_pulse_tau%g.png" % tau, figures.pulse_figure(outputs[0][0])
        )
    emitter.write_text("grape_report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0 if all_converged else 3


def _merged_gate_pulses(cfg: ExperimentConfig, preset: str, seed: int):
    """Pulses for the per-gate circuit: entangling gates at the preset's
    entangling duration, merged single-qubit pairs filling the remainder
    of the per-step implementation time."""
    from .circuits import CnotGate, build_adiabatic_circuit, gate_matrix, merge_u3_pairs

    sched = _schedule(cfg)
    plan = _plan(cfg)
    entry = DEVICE_PRESETS[preset]
    tau_cnot = entry["tau_cnot"]
    tau_pair = (entry["tau_step"] - 3.0 * tau_cnot) / 4.0
    if tau_pair * 8.0 < 8.0:
        raise ConfigError("per-step time leaves no room for single-qubit pulses")
    device = preset_device(preset, cfg.levels, cfg.alpha, cfg.g)
    gcfg = _grape_config(cfg, seed)
    circuit = merge_u3_pairs(build_adiabatic_circuit(sched, plan, include_state_prep=False))
    pulses = []
    cache: dict = {}
    for gate in circuit.gates:
        u4 = gate_matrix(gate)
        tau = tau_cnot if isinstance(gate, CnotGate) else tau_pair
        key = (round(tau, 9), np.round(u4, 12).tobytes())
        if key not in cache:
            pulse, _rep = optimize(embed_target(u4, cfg.levels), tau, device, gcfg)
            cache[key] = pulse
        pulses.append(cache[key])
    return pulses


def cmd_device_sim(cfg: ExperimentConfig, emitter: _Emitter, seed: int, threads: int) -> int:
    sched = _schedule(cfg)
    plan = _plan(cfg)
    trajectories = {}
    for preset in cfg.presets:
        device = preset_device(preset, cfg.levels, cfg.alpha, cfg.g)
        noise = NoiseParams(t1=device.t1, t2=device.t2) if cfg.noise_enabled else NoiseParams()
        for mode in cfg.modes:
            if mode == "tau_step":
                pulses = _merged_gate_pulses(cfg, preset, seed)
                per_step = len(pulses) // plan.n
            else:
                tau = float(mode)
                outputs = _synthesize_uniform(
                    dataclasses.replace(cfg, preset=preset), tau, seed, threads
                )
                pulses = [p for p, _r in outputs]
                per_step = 1
            traj = run_schedule(
                pulses, device, noise, sched=sched, plan=plan, pulses_per_step=per_step
            )
            label = "%s_%s" % (preset, mode)
            emitter.write_text("device_%s.csv" % label, traj.to_csv())
            trajectories[label] = traj
    emitter.write_figure("fig_device_sim.png", figures.trajectory_figure(trajectories))
    return 0


def _counts_for_state(psi, circuit, shots, model, seed):
    out = circuit_unitary(circuit) @ psi
    return meas.sample_counts(out, shots, model, seed)


def cmd_tomography(cfg: ExperimentConfig, emitter: _Emitter, seed: int, threads: int) -> int:
    sched = _schedule(cfg)
    plan = _plan(cfg)
    psi0 = spectrum_at(sched, 0.0).ground()[1]
    ideal = trotter_evolve(sched, plan, psi0)
    ht = build_ht().matrix()
    model = meas.ReadoutModel()
    rot_x = basis_rotation("X")
    rot_y = basis_rotation("Y")
    rows = ["t_ns,fidelity_exact,fidelity_est,energy_exact,energy_est,mitigated"]
    fid_est = []
    en_est = []
    for k in range(plan.n + 1):
        psi = ideal.states[k]
        base = seed + 1000 * k
        counts_z = meas.sample_counts(psi, cfg.shots, model, base + 1)
        counts_x = _counts_for_state(psi, rot_x, cfg.shots, model, base + 2)
        counts_y = _counts_for_state(psi, rot_y, cfg.shots, model, base + 3)
        probe = build_fidelity_probe(sched, plan, k)
        counts_probe = _counts_for_state(psi, probe, cfg.shots, model, base + 4)
        if cfg.mitigation:
            # fresh calibration draws per step, same underlying model
            ket00 = np.array([1.0, 0, 0, 0], dtype=complex)
            ket11 = np.array([0, 0, 0, 1.0], dtype=complex)
            cal00 = meas.sample_counts(ket00, cfg.shots, model, base + 5)
            cal11 = meas.sample_counts(ket11, cfg.shots, model, base + 6)
            confusion = meas.build_confusion(cal00, cal11)
            counts_z = meas.mitigate(counts_z, confusion)
            counts_x = meas.mitigate(counts_x, confusion)
            counts_y = meas.mitigate(counts_y, confusion)
            counts_probe = meas.mitigate(counts_probe, confusion)
        energy = (
            -meas.estimate_pauli(counts_x, "x", "x")
            + meas.estimate_pauli(counts_y, "y", "y")
            + 0.5 * meas.estimate_pauli(counts_z, "z", "z")
            - meas.estimate_pauli(counts_z, "z", "i")
            - meas.estimate_pauli(counts_z, "i", "z")
        )
        fidelity = meas.estimate_fidelity(counts_probe)
        fid_est.append(fidelity)
        en_est.append(energy)
        rows.append(
            "%.9g,%.12g,%.12g,%.12g,%.12g,%d"
            % (ideal.times[k], ideal.fidelities[k], fidelity,
               ideal.energies[k], energy, int(cfg.mitigation))
        )
    emitter.write_text("tomography.csv", "\n".join(rows) + "\n")
    emitter.write_figure(
        "fig_tomography.png",
        figures.tomography_figure(
            ideal.times, ideal.fidelities, fid_est, ideal.energies, en_est
        ),
    )
    return 0


def cmd_error_study(cfg: ExperimentConfig, emitter: _Emitter, seed: int, threads: int) -> int:
    seeds = [seed + i for i in range(cfg.sample_seeds)]
    tables = {
        "readout-model": meas.error_vs_shots(None, meas.ReadoutModel(), list(cfg.shot_grid), seeds),
        "error-free": meas.error_vs_shots(
            None, meas.ReadoutModel.error_free(), list(cfg.shot_grid), seeds
        ),
    }
    rows = ["shots,mean_dev_model,mean_dev_error_free"]
    for (n, dev_m), (_, dev_f) in zip(tables["readout-model"], tables["error-free"]):
        rows.append("%d,%.12g,%.12g" % (n, dev_m, dev_f))
    emitter.write_text("error_vs_shots.csv", "\n".join(rows) + "\n")
    emitter.write_figure("fig_error_vs_shots.png", figures.error_study_figure(tables))
    return 0


_COMMANDS = {
    "exact-evolve": cmd_exact_evolve,
    "grape-synth": cmd_grape_synth,
    "device-sim": cmd_device_sim,
    "tomography": cmd_tomography,
    "error-study": cmd_error_study,
}


def main(argv: list | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="adia",
        description="Adiabatic two-spin state preparation: circuits, pulses, noise, and measurement studies.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", default=None, help="TOML run file (defaults apply if omitted)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (or env ADIA_THREADS)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        threads = _thread_count(args.threads)
        seed = args.seed if args.seed is not None else cfg.seed
        emitter = _Emitter(args.out, args.command, args.config, seed)
        code = _COMMANDS[args.command](cfg, emitter, seed, threads)
        emitter.finish()
        return code
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except ValueError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except NumericalError as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
