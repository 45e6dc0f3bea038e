"""Measurement schedules that stabilize a chosen two-qubit state.

A target ``rho = sum_i p_i |B_i><B_i|`` is stabilized by four interleaved
sub-protocols. Sub-protocol ``i`` runs three weak measurements, one per
source state ``B_j`` (j != i), each coupling the system to a fresh detector
qubit through ``J_i (|B_i><B_j| ⊗ sigma^- + h.c.)`` for a time ``tau``.
One full cycle is 12 steps and lasts ``12 tau``; in the weak limit it
produces a Lindbladian with rates ``g_i = J_i**2 tau / 12``. Choosing
``g_i = gbar * p_i`` makes ``rho`` the unique steady state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    SIGMA_MINUS,
    StateValidationError,
    check_density_matrix,
    dagger,
    herm_eig,
    kron,
)

N_LEVELS = 4
STEPS_PER_CYCLE = N_LEVELS * (N_LEVELS - 1)
WEAK_JTAU_THRESHOLD = 0.3
BASIS_ATOL = 1e-10


class WeakMeasurementWarning(UserWarning):
    """A coupling leaves the weak-measurement regime (J tau above threshold)."""


class ProtocolError(ValueError):
    pass


def check_basis(basis, atol: float = BASIS_ATOL) -> np.ndarray:
    """Validate a 4x4 matrix whose columns form an orthonormal basis."""
    b = np.asarray(basis, dtype=complex)
    if b.shape != (N_LEVELS, N_LEVELS):
        raise ProtocolError(f"basis must be 4x4 (columns are basis states), got {b.shape}")
    err = np.max(np.abs(dagger(b) @ b - np.eye(N_LEVELS)))
    if err > atol:
        raise ProtocolError(f"basis is not orthonormal (max |<B_i|B_j> - delta_ij| = {err:.3e})")
    return b


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made real positive, for reproducible output
    out = vectors.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = np.argmax(np.abs(col) > np.abs(col).max() - 1e-12)
        out[:, k] = col * np.exp(-1j * np.angle(col[idx]))
    return out


@dataclass(frozen=True)
class TargetSpec:
    """Spectral decomposition of a target state: columns of ``basis`` and weights ``p``."""

    basis: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "basis", check_basis(self.basis))
        p = np.asarray(self.p, dtype=float)
        if p.shape != (N_LEVELS,):
            raise ProtocolError(f"need four probabilities, got shape {p.shape}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ProtocolError(f"probabilities must be non-negative and sum to 1, got {p}")
        object.__setattr__(self, "p", p)

    def density_matrix(self) -> np.ndarray:
        return (self.basis * self.p) @ dagger(self.basis)


@dataclass(frozen=True)
class MeasurementStep:
    target: int
    source: int
    coupling: float
    tau: float

    def __post_init__(self):
        if not (0 <= self.target < N_LEVELS and 0 <= self.source < N_LEVELS):
            raise ProtocolError(f"indices must be in 0..3, got target={self.target}, source={self.source}")
        if self.target == self.source:
            raise ProtocolError("a measurement step needs distinct target and source states")
        if self.coupling < 0:
            raise ProtocolError(f"coupling must be non-negative, got {self.coupling}")
        if self.tau <= 0:
            raise ProtocolError(f"step duration must be positive, got {self.tau}")

    @property
    def jtau(self) -> float:
        return self.coupling * self.tau


@dataclass(frozen=True)
class ProtocolSchedule:
    """One cycle of 12 measurement steps together with the rates they realize."""

    basis: np.ndarray
    tau: float
    g: np.ndarray
    couplings: np.ndarray
    steps: tuple[MeasurementStep, ...] = field(repr=False)

    @property
    def gbar(self) -> float:
        return float(np.sum(self.g))

    @property
    def p(self) -> np.ndarray:
        return self.g / self.gbar

    @property
    def cycle_time(self) -> float:
        return len(self.steps) * self.tau

    @property
    def max_jtau(self) -> float:
        return float(np.max(self.couplings) * self.tau)

    def target_state(self) -> np.ndarray:
        return (self.basis * self.p) @ dagger(self.basis)

    def permuted(self, order) -> ProtocolSchedule:
        """Same protocol with the steps of a cycle applied in a different order."""
        order = list(order)
        if sorted(order) != list(range(len(self.steps))):
            raise ProtocolError("order must be a permutation of the step indices")
        return ProtocolSchedule(self.basis, self.tau, self.g, self.couplings,
                                tuple(self.steps[k] for k in order))


def diagonalize_target(rho_target) -> TargetSpec:
    """Eigenbasis and eigenvalues (descending) of a two-qubit target state."""
    rho = check_density_matrix(rho_target, dim=N_LEVELS)
    w, v = herm_eig(rho)
    w = np.clip(w, 0.0, None)
    return TargetSpec(_fix_phases(v), w / w.sum())


def schedule_from_rates(basis, g, tau: float) -> ProtocolSchedule:
    """Build the 12-step cycle realizing Lindblad rates ``g`` with step duration ``tau``.

    Steps run round-robin over targets ``i = 0..3`` with sources ascending.
    Targets with ``g_i = 0`` keep their three steps as no-ops (``J = 0``).
    """
    basis = check_basis(basis)
    g = np.asarray(g, dtype=float)
    if g.shape != (N_LEVELS,) or np.any(g < 0):
        raise ProtocolError(f"rates must be four non-negative numbers, got {g}")
    if not g.sum() > 0:
        raise ProtocolError("no measurements configured: all rates are zero")
    if not tau > 0:
        raise ProtocolError(f"tau must be positive, got {tau}")
    couplings = np.sqrt(STEPS_PER_CYCLE * g / tau)
    jtau = couplings.max() * tau
    if jtau > WEAK_JTAU_THRESHOLD:
        warnings.warn(f"max J*tau = {jtau:.3g} exceeds {WEAK_JTAU_THRESHOLD}; "
                      "the schedule is outside the weak-measurement regime",
                      WeakMeasurementWarning, stacklevel=2)
    steps = tuple(
        MeasurementStep(i, j, float(couplings[i]), float(tau))
        for i in range(N_LEVELS) for j in range(N_LEVELS) if j != i
    )
    return ProtocolSchedule(basis, float(tau), g, couplings, steps)


def assign_couplings(spec: TargetSpec, gbar: float, tau: float) -> ProtocolSchedule:
    """Schedule with rates ``g_i = gbar * p_i``, whose steady state is the target."""
    if not gbar > 0:
        raise ProtocolError(f"gbar must be positive, got {gbar}")
    if not tau > 0:
        raise ProtocolError(f"tau must be positive, got {tau}")
    return schedule_from_rates(spec.basis, gbar * spec.p, tau)


def default_tau(p, gbar: float, max_jtau: float = 0.1) -> float:
    """Step duration at which the strongest coupling has ``J tau == max_jtau``."""
    gmax = gbar * float(np.max(p))
    return max_jtau ** 2 / (STEPS_PER_CYCLE * gmax)


def transfer_operator(basis, target: int, source: int) -> np.ndarray:
    """``|B_target><B_source|``"""
    b = np.asarray(basis, dtype=complex)
    return np.outer(b[:, target], b[:, source].conj())


def interaction_hamiltonian(step: MeasurementStep, basis) -> np.ndarray:
    """8x8 system-detector coupling ``J (|B_i><B_j| ⊗ sigma^- + h.c.)``."""
    a = step.coupling * kron(transfer_operator(basis, step.target, step.source), SIGMA_MINUS)
    return a + dagger(a)


def jump_operators(basis, target: int) -> list[np.ndarray]:
    """The four operators ``(1 - delta_ij) |B_i><B_j|`` of sub-protocol ``i = target``."""
    if not 0 <= target < N_LEVELS:
        raise ProtocolError(f"target index must be in 0..3, got {target}")
    basis = check_basis(basis)
    return [np.zeros((N_LEVELS, N_LEVELS), dtype=complex) if j == target
            else transfer_operator(basis, target, j) for j in range(N_LEVELS)]


__all__ = [
    "MeasurementStep",
    "ProtocolError",
    "ProtocolSchedule",
    "STEPS_PER_CYCLE",
    "StateValidationError",
    "TargetSpec",
    "WeakMeasurementWarning",
    "assign_couplings",
    "check_basis",
    "default_tau",
    "diagonalize_target",
    "interaction_hamiltonian",
    "jump_operators",
    "schedule_from_rates",
    "transfer_operator",
]
