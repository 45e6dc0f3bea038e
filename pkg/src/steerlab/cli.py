"""``steerlab`` command line: design, steer, sweep, trajectory, spectrum."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import files
from .linalg import StateValidationError
from .lindblad import SteadyStateError, build_liouvillian, evolve_discrete, evolve_master, spectral_gap
from .metrics import FAMILY_BASIS, family_probabilities
from .protocol import (
    ProtocolError,
    ProtocolSchedule,
    TargetSpec,
    WeakMeasurementWarning,
    assign_couplings,
    default_tau,
    diagonalize_target,
)
from .sweep import SWEEP_COLUMNS, sweep_family
from .trajectory import TrajectoryError, analytic_click_rate, ensemble_average, write_click_log

INITIAL_STATES = ("superposition", "mixed14", "target", "maximally-mixed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _unit_interval(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="steerlab", description="Measurement-based steering of two-qubit states.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def target_args(p):
        p.add_argument("--alpha", type=_unit_interval, help="family parameter alpha")
        p.add_argument("--beta", type=_unit_interval, help="family parameter beta")
        p.add_argument("--target", type=Path, help="JSON file with an explicit 4x4 target")
        p.add_argument("--gbar", type=_positive, default=1.0, help="total measurement rate")
        p.add_argument("--tau", type=_positive, help="step duration (default: max J*tau = 0.1)")

    def time_args(p, points=True):
        p.add_argument("--tmax", type=_positive, default=10.0, help="final time in units of 1/gbar")
        if points:
            p.add_argument("--points", type=int, default=101, help="number of output times")

    p = sub.add_parser("design", help="synthesize a measurement schedule")
    target_args(p)
    p.add_argument("--out", type=Path, default=Path("schedule.json"), help="schedule JSON output")

    p = sub.add_parser("steer", help="master-equation evolution towards the target")
    target_args(p)
    time_args(p)
    p.add_argument("--schedule", type=Path, help="schedule JSON from 'design' (replaces the target flags)")
    p.add_argument("--initial", choices=INITIAL_STATES, default="superposition")
    p.add_argument("--fig3", action="store_true", help="run both canonical initial states")
    p.add_argument("--discrete", action="store_true", help="apply the discrete measurement steps instead")
    p.add_argument("--out", type=Path, default=Path("steer.csv"))

    p = sub.add_parser("sweep", help="discord, concurrence, PPT and gap over the family grid")
    p.add_argument("--grid", type=int, default=21)
    p.add_argument("--gbar", type=_positive, default=1.0)
    p.add_argument("--out", type=Path, default=Path("sweep.csv"))

    p = sub.add_parser("trajectory", help="ensemble of recorded measurement trajectories")
    target_args(p)
    time_args(p, points=False)
    p.add_argument("--schedule", type=Path)
    p.add_argument("--initial", choices=INITIAL_STATES, default="superposition")
    p.add_argument("--ntraj", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("trajectory.csv"))

    p = sub.add_parser("spectrum", help="Liouvillian eigenvalues and gap")
    target_args(p)
    p.add_argument("--out", type=Path, help="optional CSV of eigenvalues")
    return parser


def _target_spec(args) -> TargetSpec:
    family = args.alpha is not None or args.beta is not None
    if family == (args.target is not None):
        raise UsageError("give either --alpha and --beta, or --target FILE")
    if family:
        if args.alpha is None or args.beta is None:
            raise UsageError("--alpha and --beta must be given together")
        return TargetSpec(FAMILY_BASIS, family_probabilities(args.alpha, args.beta))
    return diagonalize_target(files.parse_target_file(args.target))


def _schedule(args) -> ProtocolSchedule:
    if getattr(args, "schedule", None) is not None:
        if args.alpha is not None or args.beta is not None or args.target is not None:
            raise UsageError("--schedule cannot be combined with target flags")
        return files.read_schedule(args.schedule)
    spec = _target_spec(args)
    tau = args.tau if args.tau is not None else default_tau(spec.p, args.gbar)
    return assign_couplings(spec, args.gbar, tau)


def initial_state(name: str, schedule: ProtocolSchedule) -> np.ndarray:
    b = schedule.basis
    if name == "superposition":
        v = b.sum(axis=1) / 2
        return np.outer(v, v.conj())
    if name == "mixed14":
        return (np.outer(b[:, 0], b[:, 0].conj()) + np.outer(b[:, 3], b[:, 3].conj())) / 2
    if name == "target":
        return schedule.target_state()
    if name == "maximally-mixed":
        return np.eye(4, dtype=complex) / 4
    raise UsageError(f"unknown initial state {name!r}")


def _complex_str(z) -> str:
    return f"{z.real:+.6f}{z.imag:+.6f}j"


def cmd_design(args, out=sys.stdout) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", WeakMeasurementWarning)
        schedule = _schedule(args)
    print(f"tau = {schedule.tau:.12g}   gbar = {schedule.gbar:.12g}   cycle = 12 tau = {schedule.cycle_time:.12g}", file=out)
    print("i  p_i            g_i            J_i            J_i*tau   basis state B_i", file=out)
    for i in range(4):
        amps = " ".join(_complex_str(z) for z in schedule.basis[:, i])
        print(f"{i + 1}  {schedule.p[i]:.12f} {schedule.g[i]:.12f} {schedule.couplings[i]:<14.8g} "
              f"{schedule.couplings[i] * schedule.tau:<9.5f} [{amps}]", file=out)
    active = int(np.count_nonzero(schedule.g))
    print(f"active detectors: {active}", file=out)
    print(f"max J*tau = {schedule.max_jtau:.6g}", file=out)
    for w in caught:
        print(f"warning: {w.message}", file=out)
    files.write_schedule(args.out, schedule)
    print(f"schedule written to {args.out}", file=out)
    return 0


def _steer_rows(schedule: ProtocolSchedule, rho0, args):
    if args.discrete:
        n_cycles = max(1, int(round(args.tmax / (schedule.gbar * schedule.cycle_time))))
        result = evolve_discrete(schedule, rho0, n_cycles)
    else:
        if args.points < 2:
            raise UsageError("--points must be at least 2")
        times = np.linspace(0.0, args.tmax, args.points) / schedule.gbar
        result = evolve_master(build_liouvillian(schedule), rho0, times, schedule.target_state())
    pops = result.populations(schedule.basis)
    purity = np.einsum("tij,tji->t", result.states, result.states).real
    for k in range(len(result.times)):
        yield [result.gbar_t[k], result.fidelity_deviation[k], *pops[k], purity[k]]


STEER_COLUMNS = ["gbar_t", "Fbar", "p1", "p2", "p3", "p4", "purity"]


def cmd_steer(args, out=sys.stdout) -> int:
    schedule = _schedule(args)
    if args.fig3:
        runs = [("pure", "superposition"), ("mixed", "mixed14")]
        stem = args.out.with_suffix("")
        for label, name in runs:
            path = Path(f"{stem}_{label}.csv")
            rows = list(_steer_rows(schedule, initial_state(name, schedule), args))
            files.write_csv(path, STEER_COLUMNS, rows)
            print(f"{label}: final Fbar = {rows[-1][1]:.6e} -> {path}", file=out)
        return 0
    rows = list(_steer_rows(schedule, initial_state(args.initial, schedule), args))
    files.write_csv(args.out, STEER_COLUMNS, rows)
    print(f"final Fbar = {rows[-1][1]:.6e} -> {args.out}", file=out)
    return 0


def cmd_sweep(args, out=sys.stdout) -> int:
    if args.grid < 2:
        raise UsageError("--grid must be at least 2")
    rows = sweep_family(args.grid, args.gbar)
    files.write_csv(args.out, SWEEP_COLUMNS, rows)
    gaps = np.array([r["gap_over_gbar"] for r in rows])
    print(f"{len(rows)} grid points; gap/gbar in [{gaps.min():.6g}, {gaps.max():.6g}] -> {args.out}", file=out)
    return 0


TRAJECTORY_COLUMNS = ["gbar_t", "p1", "p2", "p3", "p4", "p1_se", "p2_se", "p3_se", "p4_se", "clicks_per_cycle"]


def cmd_trajectory(args, out=sys.stdout) -> int:
    if args.ntraj < 1:
        raise UsageError("--ntraj must be at least 1")
    schedule = _schedule(args)
    n_cycles = max(2, int(round(args.tmax / (schedule.gbar * schedule.cycle_time))))
    stats = ensemble_average(schedule, initial_state(args.initial, schedule), n_cycles,
                             args.ntraj, args.seed)
    clicks = np.concatenate([[0.0], stats.clicks_per_cycle])
    rows = [[stats.gbar_t[k], *stats.populations[k], *stats.population_stderr[k], clicks[k]]
            for k in range(len(stats.times))]
    files.write_csv(args.out, TRAJECTORY_COLUMNS, rows)
    log_path = Path(f"{args.out.with_suffix('')}_clicks.csv")
    write_click_log(log_path, stats.click_events, stats.detectors)
    expected = analytic_click_rate(schedule.p)
    print(f"steady-state click rate = {stats.click_rate:.6f} +- {stats.click_rate_stderr:.6f} per unit gbar*t "
          f"(weak-limit prediction {expected:.6f}); {len(stats.click_events)} clicks -> {log_path}", file=out)
    return 0


def cmd_spectrum(args, out=sys.stdout) -> int:
    schedule = _schedule(args)
    liouvillian = build_liouvillian(schedule)
    w = liouvillian.eigenvalues()
    zero = liouvillian.zero_mask(w)
    gap = spectral_gap(liouvillian)
    print("k   Re(lambda)/gbar      Im(lambda)/gbar", file=out)
    for k, lam in enumerate(w):
        mark = "  <- zero mode" if zero[k] else ""
        print(f"{k:<3d} {lam.real / schedule.gbar:+.12e} {lam.imag / schedule.gbar:+.12e}{mark}", file=out)
    print(f"gap/gbar = {gap / schedule.gbar:.12g}", file=out)
    if args.out is not None:
        files.write_csv(args.out, ["re", "im", "zero_mode"],
                        [[lam.real, lam.imag, bool(z)] for lam, z in zip(w, zero)])
    return 0


COMMANDS = {
    "design": cmd_design,
    "steer": cmd_steer,
    "sweep": cmd_sweep,
    "trajectory": cmd_trajectory,
    "spectrum": cmd_spectrum,
}


def _category(exc: Exception) -> str:
    if isinstance(exc, UsageError):
        return "usage"
    if isinstance(exc, files.TargetFileError):
        return "parse"
    if isinstance(exc, StateValidationError):
        return f"validation:{exc.check}"
    if isinstance(exc, ProtocolError):
        return "protocol"
    if isinstance(exc, (SteadyStateError, TrajectoryError)):
        return "numerics"
    if isinstance(exc, OSError):
        return "io"
    return "internal"


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, sys.stdout)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one categorized line
        msg = " ".join(str(exc).split())
        print(f"error: {_category(exc)}: {msg}", file=sys.stderr)
        return 2 if isinstance(exc, UsageError) else 1


if __name__ == "__main__":
    sys.exit(main())
