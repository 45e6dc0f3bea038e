"""Monte Carlo unraveling of the protocol with recorded detector readouts.

Every step couples the system to a detector in ``|up>`` and reads it out.
The two outcomes act through the Kraus operators ``M_up = <up|U|up>`` and
``M_down = <down|U|up>``; a ``down`` readout is a click. Trajectories keep
density matrices so that mixed initial states are allowed.

Seeding: trajectory ``k`` of an ensemble uses the stream
``PCG64(trajectory_seed(master_seed, k))`` and draws one uniform per step,
so any trajectory can be replayed alone with :func:`run_trajectory`.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linalg import check_density_matrix, dagger
from .lindblad import step_unitary
from .protocol import N_LEVELS, MeasurementStep, ProtocolSchedule

PROB_ATOL = 1e-12
PROB_FLOOR = 1e-15
CHUNK_SIZE = 256


class TrajectoryError(RuntimeError):
    pass


def step_kraus(step: MeasurementStep, basis) -> tuple[np.ndarray, np.ndarray]:
    """``(M_up, M_down)`` for one step, read off the detector blocks of ``U``."""
    u = step_unitary(step, basis).reshape(N_LEVELS, 2, N_LEVELS, 2)
    return u[:, 0, :, 0].copy(), u[:, 1, :, 0].copy()


def trajectory_seed(master_seed: int, index: int) -> int:
    """64-bit seed of trajectory ``index``: first word of ``SeedSequence([master_seed, index])``."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _uniforms(seed: int, n: int) -> np.ndarray:
    return np.random.Generator(np.random.PCG64(seed)).random(n)


def _check_probability(p: np.ndarray) -> np.ndarray:
    if np.any(p < -PROB_ATOL) or np.any(p > 1 + PROB_ATOL):
        raise TrajectoryError(f"readout probability outside [0, 1]: {p[(p < 0) | (p > 1)][:3]}")
    p = np.clip(p, 0.0, 1.0)
    # round-off residue on a dark state must not produce a click with a garbage conditional state
    return np.where(p < PROB_FLOOR, 0.0, p)


def _apply_readout(rho, m_up, m_down, u):
    """Batched measurement update. ``rho`` has shape (B, 4, 4), ``u`` shape (B,)."""
    after_down = m_down @ rho @ dagger(m_down)
    after_up = m_up @ rho @ dagger(m_up)
    p_down = _check_probability(np.trace(after_down, axis1=1, axis2=2).real)
    p_up = _check_probability(np.trace(after_up, axis1=1, axis2=2).real)
    click = u < p_down
    norm = np.where(click, p_down, p_up)
    norm = np.where(norm > 0, norm, 1.0)
    new = np.where(click[:, None, None], after_down, after_up) / norm[:, None, None]
    return (new + dagger(new)) / 2, click


def stochastic_step(rho, step: MeasurementStep, basis, rng: np.random.Generator):
    """One measured step. Returns ``(new_rho, readout)`` with readout ``"up"`` or ``"down"``."""
    rho = np.asarray(rho, dtype=complex)
    m_up, m_down = step_kraus(step, basis)
    new, click = _apply_readout(rho[None], m_up, m_down, np.array([rng.random()]))
    return new[0], ("down" if click[0] else "up")


def _run_batch(kraus, rho0, uniforms, n_cycles):
    """Run trajectories side by side. Returns states (B, n_cycles+1, 4, 4) and clicks (B, n_cycles, 12)."""
    n_batch = uniforms.shape[0]
    n_steps = len(kraus)
    rho = np.broadcast_to(rho0, (n_batch, N_LEVELS, N_LEVELS)).copy()
    states = np.empty((n_batch, n_cycles + 1, N_LEVELS, N_LEVELS), dtype=complex)
    clicks = np.zeros((n_batch, n_cycles, n_steps), dtype=bool)
    states[:, 0] = rho
    for c in range(n_cycles):
        for s, (m_up, m_down) in enumerate(kraus):
            rho, clicks[:, c, s] = _apply_readout(rho, m_up, m_down, uniforms[:, c * n_steps + s])
        states[:, c + 1] = rho
    return states, clicks


@dataclass(frozen=True)
class TrajectoryRecord:
    """One stochastic run. ``clicks[c, s]`` is True when step ``s`` of cycle ``c`` read ``down``."""

    seed: int
    cycle_times: np.ndarray
    clicks: np.ndarray
    detectors: np.ndarray
    states: np.ndarray

    @property
    def click_count(self) -> int:
        return int(np.count_nonzero(self.clicks))

    @property
    def readouts(self) -> list[tuple[int, int, int, str]]:
        """``(cycle, step, detector, readout)`` for every step, in order."""
        return [(c, s, int(self.detectors[s]), "down" if self.clicks[c, s] else "up")
                for c in range(self.clicks.shape[0]) for s in range(self.clicks.shape[1])]


def _prepare(schedule: ProtocolSchedule, rho0, n_cycles: int):
    if n_cycles < 1:
        raise ValueError("n_cycles must be at least 1")
    rho0 = check_density_matrix(rho0, dim=N_LEVELS)
    kraus = [step_kraus(s, schedule.basis) for s in schedule.steps]
    return rho0, kraus


def run_trajectory(schedule: ProtocolSchedule, rho0, n_cycles: int, seed: int) -> TrajectoryRecord:
    rho0, kraus = _prepare(schedule, rho0, n_cycles)
    u = _uniforms(seed, n_cycles * len(kraus))[None]
    states, clicks = _run_batch(kraus, rho0, u, n_cycles)
    return TrajectoryRecord(
        seed=int(seed),
        cycle_times=schedule.cycle_time * np.arange(n_cycles + 1),
        clicks=clicks[0],
        detectors=np.array([s.target for s in schedule.steps]),
        states=states[0],
    )


@dataclass(frozen=True)
class EnsembleStats:
    """Averages over ``n_traj`` trajectories, sampled once per cycle.

    ``populations`` are taken in the schedule basis. ``click_rate`` is the
    number of clicks per trajectory per unit ``gbar t``, measured over
    cycles ``burn_in_cycles`` onwards. ``click_events`` rows are
    ``(trajectory, cycle, step)`` for every click, sorted.
    """

    n_traj: int
    times: np.ndarray
    gbar: float
    mean_states: np.ndarray
    populations: np.ndarray
    population_stderr: np.ndarray
    clicks_per_cycle: np.ndarray
    click_rate: float
    click_rate_stderr: float
    burn_in_cycles: int
    click_events: np.ndarray
    detectors: np.ndarray

    @property
    def gbar_t(self) -> np.ndarray:
        return self.gbar * self.times


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("STEERLAB_THREADS", "1")))
    except ValueError:
        return 1


def ensemble_average(schedule: ProtocolSchedule, rho0, n_cycles: int, n_traj: int,
                     master_seed: int, burn_in_cycles: int | None = None,
                     workers: int | None = None) -> EnsembleStats:
    """Run ``n_traj`` trajectories and reduce them in trajectory-index order.

    Chunks of trajectories may run on ``workers`` threads (default from
    ``STEERLAB_THREADS``); the result does not depend on the worker count.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    rho0, kraus = _prepare(schedule, rho0, n_cycles)
    if burn_in_cycles is None:
        burn_in_cycles = n_cycles // 2
    if not 0 <= burn_in_cycles < n_cycles:
        raise ValueError("burn_in_cycles must be in [0, n_cycles)")
    n_steps = n_cycles * len(kraus)
    basis = schedule.basis

    def run_chunk(start):
        idx = range(start, min(start + CHUNK_SIZE, n_traj))
        u = np.stack([_uniforms(trajectory_seed(master_seed, k), n_steps) for k in idx])
        states, clicks = _run_batch(kraus, rho0, u, n_cycles)
        pops = np.einsum("ki,btkl,li->bti", basis.conj(), states, basis).real
        window = clicks[:, burn_in_cycles:].sum(axis=(1, 2))
        events = np.argwhere(clicks)
        events[:, 0] += start
        return (states.sum(axis=0), pops.sum(axis=0), (pops ** 2).sum(axis=0),
                clicks.sum(axis=(0, 2)), window, events)

    starts = list(range(0, n_traj, CHUNK_SIZE))
    workers = _worker_count() if workers is None else max(1, workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, starts))
    else:
        parts = [run_chunk(s) for s in starts]

    state_sum = sum(p[0] for p in parts)
    pop_sum = sum(p[1] for p in parts)
    pop_sq = sum(p[2] for p in parts)
    click_sum = sum(p[3] for p in parts)
    window = np.concatenate([p[4] for p in parts]).astype(float)
    events = np.concatenate([p[5] for p in parts]) if parts else np.zeros((0, 3), int)

    mean_pop = pop_sum / n_traj
    if n_traj > 1:
        var = np.clip(pop_sq / n_traj - mean_pop ** 2, 0.0, None) * n_traj / (n_traj - 1)
        stderr = np.sqrt(var / n_traj)
    else:
        stderr = np.zeros_like(mean_pop)
    window_time = (n_cycles - burn_in_cycles) * schedule.cycle_time * schedule.gbar
    rate = window.mean() / window_time
    rate_se = (window.std(ddof=1) / np.sqrt(n_traj) / window_time) if n_traj > 1 else 0.0

    return EnsembleStats(
        n_traj=n_traj,
        times=schedule.cycle_time * np.arange(n_cycles + 1),
        gbar=schedule.gbar,
        mean_states=state_sum / n_traj,
        populations=mean_pop,
        population_stderr=stderr,
        clicks_per_cycle=click_sum / n_traj,
        click_rate=float(rate),
        click_rate_stderr=float(rate_se),
        burn_in_cycles=burn_in_cycles,
        click_events=events,
        detectors=np.array([s.target for s in schedule.steps]),
    )


def analytic_click_rate(p) -> float:
    """Steady-state clicks per unit ``gbar t``: ``sum_i p_i (1 - p_i)``."""
    p = np.asarray(p, dtype=float)
    return float(np.sum(p * (1 - p)))


def write_click_log(path, events, detectors) -> None:
    """CSV with one row per click: trajectory, cycle, step, detector, readout."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trajectory", "cycle", "step", "detector", "readout"])
        for traj, cycle, step in events:
            w.writerow([int(traj), int(cycle), int(step), int(detectors[step]), "down"])


__all__ = [
    "EnsembleStats",
    "TrajectoryError",
    "TrajectoryRecord",
    "analytic_click_rate",
    "ensemble_average",
    "run_trajectory",
    "step_kraus",
    "stochastic_step",
    "trajectory_seed",
    "write_click_log",
]
