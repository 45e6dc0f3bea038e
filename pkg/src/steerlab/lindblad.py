"""Liouvillian of the steering protocol, its steady state, gap and time evolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    UP,
    StateValidationError,
    check_density_matrix,
    dagger,
    devectorize,
    expm,
    expm_hermitian_generator,
    kron,
    partial_trace_detector,
    projector,
    vectorize,
)
from .metrics import fidelity_deviation
from .protocol import (
    N_LEVELS,
    MeasurementStep,
    ProtocolError,
    ProtocolSchedule,
    check_basis,
    interaction_hamiltonian,
    jump_operators,
)

ZERO_EIGENVALUE_RTOL = 1e-9
STEADY_RESIDUAL_ATOL = 1e-10

_DETECTOR_READY = projector(UP)


class SteadyStateError(RuntimeError):
    pass


def dissipator_superoperator(op: np.ndarray) -> np.ndarray:
    """Column-stacked matrix of ``rho -> L rho L^dagger - {L^dagger L, rho}/2``."""
    eye = np.eye(op.shape[0])
    ldl = dagger(op) @ op
    return kron(op.conj(), op) - 0.5 * kron(eye, ldl) - 0.5 * kron(ldl.T, eye)


def sub_liouvillian(basis, target: int) -> np.ndarray:
    """Unit-rate generator of the sub-protocol that pumps every ``B_j`` into ``B_target``."""
    return sum(dissipator_superoperator(op) for op in jump_operators(basis, target))


def apply_lindbladian(rho, basis, g) -> np.ndarray:
    """Evaluate the generator on a matrix directly, without building a superoperator."""
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    for i, gi in enumerate(g):
        for op in jump_operators(basis, i):
            ldl = dagger(op) @ op
            out += gi * (op @ rho @ dagger(op) - 0.5 * (ldl @ rho + rho @ ldl))
    return out


@dataclass(frozen=True)
class Liouvillian:
    """16x16 generator acting on column-stacked two-qubit density matrices."""

    matrix: np.ndarray
    g: np.ndarray
    basis: np.ndarray

    @classmethod
    def from_rates(cls, basis, g) -> Liouvillian:
        basis = check_basis(basis)
        g = np.asarray(g, dtype=float)
        if g.shape != (N_LEVELS,) or np.any(g < 0):
            raise ProtocolError(f"rates must be four non-negative numbers, got {g}")
        matrix = np.zeros((N_LEVELS ** 2, N_LEVELS ** 2), dtype=complex)
        for i, gi in enumerate(g):
            if gi:
                matrix += gi * sub_liouvillian(basis, i)
        return cls(matrix, g, basis)

    @property
    def gbar(self) -> float:
        return float(np.sum(self.g))

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return devectorize(self.matrix @ vectorize(rho), rho.shape[0])

    def eigenvalues(self) -> np.ndarray:
        """All 16 eigenvalues sorted by decreasing real part."""
        w = np.linalg.eigvals(self.matrix)
        return w[np.lexsort((w.imag, -w.real))]

    def zero_mask(self, eigenvalues=None) -> np.ndarray:
        w = self.eigenvalues() if eigenvalues is None else eigenvalues
        return np.abs(w) < ZERO_EIGENVALUE_RTOL * self.gbar


def build_liouvillian(schedule: ProtocolSchedule) -> Liouvillian:
    return Liouvillian.from_rates(schedule.basis, schedule.g)


def _require_rates(liouvillian: Liouvillian) -> None:
    if not liouvillian.gbar > 0:
        raise SteadyStateError("no measurements configured: all rates are zero")


def steady_state(liouvillian: Liouvillian) -> np.ndarray:
    """The unique trace-one null vector of ``liouvillian`` as a density matrix."""
    _require_rates(liouvillian)
    w = liouvillian.eigenvalues()
    n_zero = int(np.count_nonzero(liouvillian.zero_mask(w)))
    if n_zero != 1:
        small = np.sort(np.abs(w))[:3]
        raise SteadyStateError(
            f"null space has dimension {n_zero}, expected 1 "
            f"(smallest |eigenvalues| / gbar = {small / liouvillian.gbar})")
    _, _, vh = np.linalg.svd(liouvillian.matrix)
    rho = devectorize(vh[-1].conj(), N_LEVELS)
    rho = rho / np.trace(rho)
    rho = (rho + dagger(rho)) / 2
    lam, vec = np.linalg.eigh(rho)
    if lam.min() < -1e-8:
        raise SteadyStateError(f"null vector is not positive (eigenvalue {lam.min():.3e})")
    lam = np.clip(lam, 0.0, None)
    rho = (vec * (lam / lam.sum())) @ dagger(vec)
    residual = np.max(np.abs(liouvillian(rho)))
    if residual > STEADY_RESIDUAL_ATOL * max(1.0, liouvillian.gbar):
        raise SteadyStateError(f"steady-state residual {residual:.3e} too large")
    return rho


def spectral_gap(liouvillian: Liouvillian) -> float:
    """Smallest ``|Re lambda|`` over the non-zero eigenvalues."""
    _require_rates(liouvillian)
    w = liouvillian.eigenvalues()
    nonzero = w[~liouvillian.zero_mask(w)]
    if nonzero.size == 0:
        raise SteadyStateError("Liouvillian has no non-zero eigenvalues")
    return float(np.min(np.abs(nonzero.real)))


@dataclass(frozen=True)
class EvolutionResult:
    """Density matrices at ``times``; ``fidelity_deviation`` is NaN without a target."""

    times: np.ndarray
    states: np.ndarray
    fidelity_deviation: np.ndarray
    gbar: float

    @property
    def gbar_t(self) -> np.ndarray:
        return self.gbar * self.times

    def populations(self, basis) -> np.ndarray:
        """Diagonal of each state in ``basis`` (columns), shape ``(n_times, 4)``."""
        b = np.asarray(basis, dtype=complex)
        return np.einsum("ki,tkl,li->ti", b.conj(), self.states, b).real


def _deviations(states, rho_target) -> np.ndarray:
    if rho_target is None:
        return np.full(len(states), np.nan)
    return np.array([fidelity_deviation(s, rho_target) for s in states])


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0 or t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be non-negative and strictly increasing")
    return t


def evolve_master(liouvillian: Liouvillian, rho0, t_grid, rho_target=None) -> EvolutionResult:
    """Exact solution ``rho(t) = exp(L t) rho0`` on each grid time."""
    rho0 = check_density_matrix(rho0, dim=N_LEVELS)
    t = _check_grid(t_grid)
    v0 = vectorize(rho0)
    states = []
    for tk in t:
        rho = devectorize(expm(liouvillian.matrix * tk) @ v0, N_LEVELS)
        states.append((rho + dagger(rho)) / 2)
    states = np.array(states)
    return EvolutionResult(t, states, _deviations(states, rho_target), liouvillian.gbar)


def step_unitary(step: MeasurementStep, basis) -> np.ndarray:
    return expm_hermitian_generator(interaction_hamiltonian(step, basis), step.tau)


def discrete_step(rho, unitary: np.ndarray) -> np.ndarray:
    """One blind measurement: couple to a fresh detector in |up>, evolve, trace it out."""
    joint = kron(rho, _DETECTOR_READY)
    return partial_trace_detector(unitary @ joint @ dagger(unitary))


def evolve_discrete(schedule: ProtocolSchedule, rho0, n_cycles: int, rho_target=None) -> EvolutionResult:
    """Apply the 12-step cycle ``n_cycles`` times, recording the state once per cycle.

    The first recorded state is ``rho0`` at ``t = 0``.
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be at least 1")
    rho = check_density_matrix(rho0, dim=N_LEVELS)
    unitaries = [step_unitary(s, schedule.basis) for s in schedule.steps]
    states = [rho]
    for _ in range(n_cycles):
        for u in unitaries:
            rho = discrete_step(rho, u)
        states.append(rho)
    states = np.array(states)
    times = schedule.cycle_time * np.arange(n_cycles + 1)
    if rho_target is None:
        rho_target = schedule.target_state()
    return EvolutionResult(times, states, _deviations(states, rho_target), schedule.gbar)


def first_order_term(rho, step: MeasurementStep, basis) -> np.ndarray:
    """``Tr_d [rho ⊗ |up><up|, H]``, the would-be Hamiltonian part of the generator."""
    joint = kron(rho, _DETECTOR_READY)
    h = interaction_hamiltonian(step, basis)
    return partial_trace_detector(joint @ h - h @ joint)


__all__ = [
    "EvolutionResult",
    "Liouvillian",
    "SteadyStateError",
    "StateValidationError",
    "apply_lindbladian",
    "build_liouvillian",
    "discrete_step",
    "dissipator_superoperator",
    "evolve_discrete",
    "evolve_master",
    "first_order_term",
    "spectral_gap",
    "steady_state",
    "step_unitary",
    "sub_liouvillian",
]
