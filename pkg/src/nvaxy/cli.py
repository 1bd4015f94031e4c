"""Command-line front end.

Every subcommand reads one YAML config, validates it completely, runs, and
writes CSV/JSON results plus ``manifest.json`` into ``--out``.  Outputs carry
no timestamps, so identical inputs give byte-identical files.

Exit codes: 0 success, 2 config error, 3 solver or infeasible target,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import analysis, gates, pulses, qec
from .config import (
    ConfigError,
    build_errors,
    build_gate_spec,
    build_noise,
    build_register,
    config_hash,
    load_config,
    sequence_options,
)
from .register import RegisterError, UnaddressableSpinError, derive_frames

log = logging.getLogger("nvaxy")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_NUMERICAL = 0, 2, 3, 4


class NumericalFailure(RuntimeError):
    """A result is non-finite or fails its internal consistency check."""


SOLVER_ERRORS = (
    pulses.UnreachableCoefficientError,
    pulses.SolverError,
    pulses.OverlapError,
    gates.InfeasibleTargetError,
    gates.ResonanceError,
    analysis.AmplitudeBoundError,
    qec.DegenerateCodeError,
)
CONFIG_ERRORS = (ConfigError, RegisterError, UnaddressableSpinError)
NUMERICAL_ERRORS = (NumericalFailure, np.linalg.LinAlgError, FloatingPointError)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "0+unknown"


class Output:
    """Ordered, single-threaded writer for one command run."""

    def __init__(self, directory: Path, formats: Iterable[str]):
        self.dir = directory
        self.formats = set(formats)
        self.files: list[str] = []
        directory.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
        if "csv" not in self.formats:
            return
        with open(self.dir / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.files.append(name)

    def json(self, name: str, payload: dict) -> None:
        if "json" not in self.formats:
            return
        (self.dir / name).write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")
        self.files.append(name)

    def manifest(self, command: str, config: dict, seed: int, threads: int) -> None:
        payload = {
            "command": command,
            "version": _version(),
            "config_sha256": config_hash(config),
            "seed": seed,
            "threads": threads,
            "outputs": self.files,
        }
        (self.dir / "manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _finite(*values: float) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalFailure("numerical failure: non-finite result")


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    """Order-preserving map, threaded when ``threads > 1``."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve_pulses(config: dict, out: Output, seed: int, threads: int) -> dict:
    register = build_register(config)
    seq = config.get("sequence", {})
    if "f_target" not in seq:
        raise ConfigError("config error at sequence/f_target: required by solve-pulses")
    opts = sequence_options(config)
    spec = build_gate_spec(config)
    reps = seq.get("repetitions", 1)
    if reps == "auto":
        raise ConfigError("config error at sequence/repetitions: solve-pulses needs an explicit integer")
    tau = gates.resonant_tau(register, spec.target, opts["k_dd"])
    layout = pulses.solve_axy_positions(seq["f_target"], opts["k_dd"], seq.get("parity", "even"))
    axy = pulses.AxySequenceSpec(layout, tau, reps, opts["rabi"], opts["variant"])
    schedule = pulses.build_schedule(axy, instantaneous=opts["instantaneous"])
    report = pulses.schedule_report(axy)
    worst = max(abs(v) for v in report["residuals"].values())
    _finite(worst)
    if worst > 1e-9:
        raise NumericalFailure(f"numerical failure: Fourier residual {worst:.3e} exceeds 1e-9")
    if "csv" in out.formats:
        pulses.write_schedule(schedule, out.dir / "schedule.csv", report)
        out.files += ["schedule.csv", "schedule.json"]
    else:
        out.json("schedule.json", report)
    return {"max_residual": worst, "n_pulses": len(schedule.pulses)}


def _scan_range(block: dict, lo: int, hi: int, path: str) -> range:
    n_min, n_max = block.get("n_min", lo), block.get("n_max", hi)
    if n_min > n_max:
        raise ConfigError(f"config error at {path}: empty sweep range n_min = {n_min} > n_max = {n_max}")
    return range(n_min, n_max + 1)


def cmd_gate_scan(config: dict, out: Output, seed: int, threads: int) -> dict:
    register = build_register(config)
    seq = config.get("sequence", {})
    Ns = _scan_range(seq, 4, 40, "sequence")
    opts = sequence_options(config)
    spec = build_gate_spec(config)
    errors = build_errors(config)
    offsets = seq.get("tau_offsets", [0.0])

    def run(N: int) -> list:
        return gates.scan_repetitions(register, spec, [N], errors, opts["k_dd"], opts["rabi"], opts["variant"],
                                      opts["instantaneous"], offsets)

    points = [p for chunk in _pmap(run, list(Ns), threads) for p in chunk]
    if not points:
        raise pulses.UnreachableCoefficientError("unreachable coefficient for every N in the sweep")
    for p in points:
        _finite(p.simulated_fidelity)
    out.csv(
        "gate_scan.csv",
        ["N", "tau_s", "f_kdd", "predicted_fidelity", "simulated_fidelity", "infidelity"],
        [(p.N, p.tau, p.f_kdd, p.predicted_fidelity, p.simulated_fidelity, p.infidelity) for p in points],
    )
    best = min(points, key=lambda p: p.infidelity)
    diffs = [abs(p.predicted_fidelity - p.simulated_fidelity) for p in points if np.isfinite(p.predicted_fidelity)]
    summary = {
        "best_N": best.N,
        "min_infidelity": best.infidelity,
        "max_abs_prediction_error": max(diffs) if diffs else None,
        "high_field_margin": gates.high_field_margin(register, opts["k_dd"]),
    }
    out.json("gate_scan.json", summary)
    return summary


def cmd_optimize_time(config: dict, out: Output, seed: int, threads: int) -> dict:
    register = build_register(config)
    seq = config.get("sequence", {})
    opts = sequence_options(config)
    spec = build_gate_spec(config)
    res = gates.optimize_gate_time(register, spec, seq.get("target_fidelity", 0.999),
                                   seq.get("n_max", 200), opts["k_dd"], opts["variant"])
    row = {"N": res.N, "tau_s": res.tau, "f_kdd": res.f_kdd, "predicted_fidelity": res.predicted_fidelity,
           "total_time_s": res.total_time, "t_min_s": res.t_min, "time_ratio": res.time_ratio}
    out.csv("optimize_time.csv", list(row), [list(row.values())])
    out.json("optimize_time.json", row)
    return row


def cmd_qec(config: dict, out: Output, seed: int, threads: int) -> dict:
    register = build_register(config)
    block = config.get("qec", {})
    ps = block.get("p", 0.05)
    ps = [ps] if isinstance(ps, (int, float)) else list(ps)
    opts = sequence_options(config)
    mode = block.get("gates", "ideal")
    if mode == "ideal":
        rep_sets: list = [None]
    elif "repetitions" in block:
        rep_sets = [{0: a, 1: b} for a, b in block["repetitions"]]
    else:
        rep_sets = [qec.optimized_repetitions(register, block.get("target_fidelity", 0.999), k_dd=opts["k_dd"])]
    errors, noise = build_errors(config), build_noise(config, register)
    runs, rows = [], []
    for reps in rep_sets:
        gs = (qec.GateSet(register, "ideal") if reps is None else
              qec.GateSet(register, "simulated", reps, errors=errors, noise=noise, rabi=opts["rabi"],
                          instantaneous=opts["instantaneous"], k_dd=opts["k_dd"]))
        for p in ps:
            cfg = qec.ProtocolConfig(gates=gs, p=p, averaging=block.get("averaging", "two_design"),
                                     samples=block.get("samples", 10_000), seed=seed,
                                     flip_errors=block.get("flip_errors", False))
            report = qec.qec_report(register, cfg, echo={"p": p, "gates": mode,
                                                         "repetitions": None if reps is None else [reps[0], reps[1]]})
            _finite(report.average_fidelity)
            runs.append(report.to_json())
            rows.append((p, 0 if reps is None else reps[0], 0 if reps is None else reps[1],
                         report.average_fidelity, report.stderr, report.gate_time))
    out.csv("qec_sweep.csv", ["p", "N1", "N2", "average_fidelity", "stderr", "gate_time_s"], rows)
    out.json("qec_report.json", {"runs": runs})
    return {"average_fidelity": [r[3] for r in rows]}


def cmd_filter(config: dict, out: Output, seed: int, threads: int) -> dict:
    register = build_register(config)
    block = config.get("filter", {})
    opts = sequence_options(config)
    spec = build_gate_spec(config)
    k = opts["k_dd"]
    tau = gates.resonant_tau(register, spec.target, k)
    w_dd = 2 * np.pi * k / tau
    lo, hi = block.get("omega_min_rel", 0.8), block.get("omega_max_rel", 1.2)
    if lo >= hi:
        raise ConfigError("config error at filter: omega_min_rel must be below omega_max_rel")
    omega = np.linspace(lo, hi, block.get("points", 2001)) * w_dd
    reps = block.get("repetitions", 10)
    summary = {"omega_dd_rad_s": w_dd}
    for name, key in (("filter.csv", "f_target"), ("filter_compare.csv", "f_compare")):
        if key not in block and key == "f_compare":
            continue
        f = block.get(key, 0.5)
        layout = pulses.solve_axy_positions(f, k, "even")
        sched = pulses.build_schedule(pulses.AxySequenceSpec(layout, tau, reps, opts["rabi"], opts["variant"]))
        res = analysis.filter_function(sched, omega)
        if "csv" in out.formats:
            analysis.write_filter_csv(res, out.dir / name)
            out.files.append(name)
        summary[key] = {"f": f, "peak_phi_tot_s": float(res.phi_tot.max()),
                        "fwhm_rad_s": analysis.peak_bandwidth(omega, res.phi_tot, res.phi_tot.max() / 2)}
    out.json("filter.json", summary)
    return summary


def cmd_soft_control(config: dict, out: Output, seed: int, threads: int) -> dict:
    register = build_register(config)
    block = config.get("soft_control", {})
    opts = sequence_options(config)
    spec = build_gate_spec(config)
    frames = derive_frames(register)
    n = spec.target
    j = block.get("spectator", 1 if n == 0 else 0)
    if j == n or j >= register.n_nuclei:
        raise ConfigError(f"config error at soft_control/spectator: invalid spectator {j}")
    Ns = np.array(_scan_range(block, 4, 60, "soft_control"))
    tau = gates.resonant_tau(register, n, opts["k_dd"])
    T = gates.repetition_length(opts["variant"]) * tau * Ns
    s = block.get("sigma_over_t", 0.15)
    vartheta = (frames[j].omega - frames[n].omega) * T / 2
    g_ratio = frames[j].g / frames[n].g
    d_const = gates.decoupling_efficiency(vartheta, g_ratio, spec.angle)
    d_soft = analysis.shaped_decoupling_efficiency(vartheta, g_ratio, spec.angle,
                                                   analysis.gaussian_envelope(s, block.get("steps", 400)))
    c_n = register.m_s * frames[n].g / 4
    f0 = np.array([analysis.gaussian_amplitude(spec.angle, t, s * t, c_n) for t in T])
    _finite(*d_soft)
    out.csv("soft_control.csv", ["N", "D_constant", "D_gaussian", "f0", "within_bound"],
            zip(Ns, d_const, d_soft, f0, np.abs(f0) < pulses.F_BOUND))
    t_last = T[-1]
    sampling = {}
    for m in block.get("sampling_tau", [4.0, 2.0, 1.0, 0.5]):
        prof = analysis.soft_control_profile(spec.angle, t_last, s * t_last, c_n, m * tau, enforce_bound=False)
        sampling[str(m)] = {"l1_error": prof.l1_error(), "angle_error_rad": prof.rotation_angle() - spec.angle}
    summary = {
        "sigma_over_t": s,
        "oscillation_amplitude_constant": analysis.oscillation_amplitude(d_const),
        "oscillation_amplitude_gaussian": analysis.oscillation_amplitude(d_soft),
        "sampling_at_n_max": sampling,
    }
    out.json("soft_control.json", summary)
    return summary


def cmd_abundance(config: dict, out: Output, seed: int, threads: int) -> dict:
    block = config.get("abundance", {})
    if "thresholds_khz" in block:
        thresholds = 2 * np.pi * 1e3 * np.asarray(block["thresholds_khz"], dtype=float)
    else:
        register = build_register(config)
        thresholds = np.array([np.linalg.norm(nuc.hyperfine) for nuc in register.nuclei])
    counts = np.atleast_1d(analysis.coupling_abundance(thresholds, block.get("p13c", analysis.C13_NATURAL_ABUNDANCE)))
    if "csv" in out.formats:
        analysis.write_abundance_csv(thresholds, counts, out.dir / "abundance.csv")
        out.files.append("abundance.csv")
    summary = {"expected_counts": counts, "joint_probability": analysis.joint_abundance_probability(counts)}
    out.json("abundance.json", summary)
    return summary


COMMANDS: dict[str, Callable] = {
    "solve-pulses": cmd_solve_pulses,
    "gate-scan": cmd_gate_scan,
    "optimize-time": cmd_optimize_time,
    "qec": cmd_qec,
    "filter": cmd_filter,
    "soft-control": cmd_soft_control,
    "abundance": cmd_abundance,
}


HELP = {
    "solve-pulses": "solve composite pulse positions and write the schedule",
    "gate-scan": "simulated and predicted gate fidelity over repetition numbers",
    "optimize-time": "shortest sequence reaching a target fidelity",
    "qec": "average correction fidelity of the repetition code",
    "filter": "filter function sweep around the resonant frequency",
    "soft-control": "decoupling efficiency under a Gaussian coupling profile",
    "abundance": "expected number of 13C spins above a coupling threshold",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvaxy", description="AXY gate compiler and simulator for NV registers.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, type=Path, help="YAML experiment config")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=0, help="seed for Monte Carlo averaging")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("config error at --seed: must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("config error at --threads: must be positive")
        config = load_config(args.config)
        out = Output(args.out, config.get("output", {}).get("formats", ["csv", "json"]))
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            summary = COMMANDS[args.command](config, out, args.seed, args.threads)
        out.manifest(args.command, config, args.seed, args.threads)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SOLVER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(_clean(summary), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
