import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import solve_ivp

from steerlab.linalg import (
    dagger,
    projector,
    random_density_matrix,
    random_unitary,
    vectorize,
)
from steerlab.lindblad import (
    Liouvillian,
    SteadyStateError,
    apply_lindbladian,
    dissipator_superoperator,
    build_liouvillian,
    discrete_step,
    evolve_discrete,
    evolve_master,
    first_order_term,
    spectral_gap,
    steady_state,
    step_unitary,
    sub_liouvillian,
)
from steerlab.metrics import FAMILY_BASIS, family_probabilities, family_state
from steerlab.protocol import TargetSpec, assign_couplings, default_tau, schedule_from_rates

from conftest import random_target


def _uniform_superposition(basis):
    v = basis.sum(axis=1) / 2
    return projector(v)


def _family_schedule(alpha=0.5, beta=0.5, gbar=1.0, tau=None):
    p = family_probabilities(alpha, beta)
    tau = default_tau(p, gbar) if tau is None else tau
    return assign_couplings(TargetSpec(FAMILY_BASIS, p), gbar, tau)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_superoperator_matches_direct_evaluation(seed):
    rng = np.random.default_rng(seed)
    basis, p = random_target(rng)
    g = 2.3 * p
    liou = Liouvillian.from_rates(basis, g)
    rho = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert_allclose(liou(rho), apply_lindbladian(rho, basis, g), atol=1e-13)
    # trace preservation: the row functional of Tr annihilates the generator
    assert abs(np.trace(liou(rho))) <= 1e-12
    assert np.max(np.abs(vectorize(np.eye(4)) @ liou.matrix)) <= 1e-12
    assert np.all(liou.eigenvalues().real <= 1e-10)


def test_target_is_annihilated(rng):
    basis, p = random_target(rng)
    g = 0.7 * p
    rho_t = (basis * g) @ dagger(basis) / g.sum()
    assert np.max(np.abs(Liouvillian.from_rates(basis, g)(rho_t))) <= 1e-14


def test_equal_rates_steady_state_is_maximally_mixed(rng):
    liou = Liouvillian.from_rates(random_unitary(4, rng), [0.5] * 4)
    assert_allclose(steady_state(liou), np.eye(4) / 4, atol=1e-12)


def test_pure_protocol_spectrum_by_hand():
    # populations of B_2..B_4 and coherences among them decay at g, coherences with B_1 at g/2
    g = 1.7
    liou = Liouvillian.from_rates(np.eye(4), [g, 0, 0, 0])
    w = np.sort(liou.eigenvalues().real)
    expected = np.sort([0.0] + [-g / 2] * 6 + [-g] * 9)
    assert_allclose(w, expected, atol=1e-12)
    assert_allclose(liou.eigenvalues().imag, 0.0, atol=1e-12)
    assert spectral_gap(liou) == pytest.approx(g / 2, rel=1e-12)


def test_steady_state_examples(rng):
    basis = random_unitary(4, rng)
    assert_allclose(steady_state(Liouvillian.from_rates(basis, [2.0, 0, 0, 0])),
                    projector(basis[:, 0]), atol=1e-12)
    expected = (projector(basis[:, 0]) + projector(basis[:, 3])) / 2
    assert_allclose(steady_state(Liouvillian.from_rates(basis, [1.0, 0, 0, 1.0])), expected, atol=1e-12)
    s = _family_schedule(0.2, 0.9)
    assert_allclose(steady_state(build_liouvillian(s)), family_state(0.2, 0.9), atol=1e-12)


def test_steady_state_without_measurements():
    liou = Liouvillian.from_rates(np.eye(4), [0, 0, 0, 0])
    with pytest.raises(SteadyStateError, match="no measurements configured"):
        steady_state(liou)
    with pytest.raises(SteadyStateError):
        spectral_gap(liou)


def test_steady_state_reports_degenerate_null_space():
    liou = Liouvillian.from_rates(np.eye(4), [1.0, 0, 0, 0])
    with pytest.raises(SteadyStateError, match="dimension 16"):
        steady_state(Liouvillian(np.zeros((16, 16)), liou.g, liou.basis))
    # without the B_2 -> B_1 channel the whole B_1, B_2 block (populations and coherences) is stationary
    bad = liou.matrix - dissipator_superoperator(np.outer(np.eye(4)[0], np.eye(4)[1]))
    with pytest.raises(SteadyStateError, match="dimension 4"):
        steady_state(Liouvillian(bad, liou.g, liou.basis))


def test_gap_scales_linearly(rng):
    basis, p = random_target(rng)
    gap1 = spectral_gap(Liouvillian.from_rates(basis, p))
    for c in (0.1, 3.0, 250.0):
        assert spectral_gap(Liouvillian.from_rates(basis, c * p)) == pytest.approx(c * gap1, rel=1e-10)


def test_family_gap_matches_late_time_decay():
    s = _family_schedule()
    liou = build_liouvillian(s)
    gap = spectral_gap(liou)
    assert 0.1 < gap < 1.0
    t = np.linspace(20.0, 30.0, 11)
    res = evolve_master(liou, _uniform_superposition(FAMILY_BASIS), t)
    dist = np.linalg.norm(res.states - family_state(0.5, 0.5), axis=(1, 2))
    slope = np.polyfit(t, np.log(dist), 1)[0]
    assert -slope == pytest.approx(gap, rel=1e-2)


def test_evolve_master_target_is_stationary():
    s = _family_schedule()
    res = evolve_master(build_liouvillian(s), s.target_state(), np.linspace(0, 10, 21), s.target_state())
    assert np.max(res.fidelity_deviation) <= 1e-10
    assert np.max(np.abs(res.states - s.target_state())) <= 1e-12


def test_evolve_master_matches_ode_integration(rng):
    basis, p = random_target(rng)
    liou = Liouvillian.from_rates(basis, 1.3 * p)
    rho0 = random_density_matrix(4, rng)
    t = np.linspace(0, 3, 7)
    res = evolve_master(liou, rho0, t)

    def rhs(_, y):
        return apply_lindbladian(y.reshape(4, 4), basis, 1.3 * p).ravel()

    sol = solve_ivp(rhs, (0, 3), rho0.ravel(), t_eval=t, rtol=1e-11, atol=1e-13)
    assert_allclose(res.states, sol.y.T.reshape(-1, 4, 4), atol=1e-8)


def test_evolve_master_finite_difference_residual(rng):
    basis, p = random_target(rng)
    liou = Liouvillian.from_rates(basis, p)
    rho0 = random_density_matrix(4, rng)
    h = 1e-4
    for t0 in (0.3, 1.0, 4.0):
        res = evolve_master(liou, rho0, [t0 - h, t0, t0 + h])
        deriv = (res.states[2] - res.states[0]) / (2 * h)
        assert np.max(np.abs(deriv - liou(res.states[1]))) <= 1e-8


def test_evolve_master_states_are_density_matrices(rng):
    s = _family_schedule(0.1, 0.9)
    res = evolve_master(build_liouvillian(s), random_density_matrix(4, rng), np.linspace(0, 8, 17))
    for rho in res.states:
        assert np.max(np.abs(rho - dagger(rho))) <= 1e-12
        assert abs(np.trace(rho) - 1) <= 1e-12
        assert np.linalg.eigvalsh(rho).min() >= -1e-10


def test_evolve_master_rejects_bad_grid():
    s = _family_schedule()
    with pytest.raises(ValueError):
        evolve_master(build_liouvillian(s), s.target_state(), [0.0, 1.0, 1.0])


def test_discrete_step_leaves_target_untouched(rng):
    basis = random_unitary(4, rng)
    s = schedule_from_rates(basis, [0.25] * 4, 1e-3)
    for step in s.steps:
        rho = projector(basis[:, step.target])
        assert np.max(np.abs(discrete_step(rho, step_unitary(step, basis)) - rho)) <= 1e-12


def test_discrete_trace_preserved_every_step(rng):
    s = _family_schedule(0.3, 0.6)
    rho = random_density_matrix(4, rng)
    for _ in range(3):
        for step in s.steps:
            rho = discrete_step(rho, step_unitary(step, s.basis))
            assert abs(np.trace(rho) - 1) <= 1e-12


def test_first_order_term_vanishes(rng):
    s = _family_schedule(0.3, 0.6, tau=0.01)
    basis = random_unitary(4, rng)
    for step in s.steps:
        for _ in range(3):
            rho = random_density_matrix(4, rng)
            assert np.max(np.abs(first_order_term(rho, step, basis))) <= 1e-12


def _one_cycle_error(schedule, rho0):
    disc = evolve_discrete(schedule, rho0, 1).states[-1]
    cont = evolve_master(build_liouvillian(schedule), rho0, [schedule.cycle_time]).states[-1]
    return np.linalg.norm(disc - cont)


def test_discrete_cycle_error_is_second_order():
    p = family_probabilities(0.5, 0.5)
    spec = TargetSpec(FAMILY_BASIS, p)
    rho0 = _uniform_superposition(FAMILY_BASIS)
    tau0 = default_tau(p, 1.0)
    errors = [_one_cycle_error(assign_couplings(spec, 1.0, tau0 / 2 ** k), rho0) for k in range(4)]
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert_allclose(ratios, 4.0, atol=0.1)
    # bounded by C (max J tau)^2 per cycle
    assert errors[0] <= 0.1 * 0.1 ** 2


def test_cross_annihilation(rng):
    for _ in range(20):
        basis = random_unitary(4, rng)
        g = rng.uniform(0, 2, size=4)
        rho = (basis * g) @ dagger(basis)
        total = sum(g[i] * (sub_liouvillian(basis, i) @ vectorize(rho)) for i in range(4))
        assert np.max(np.abs(total)) <= 1e-12


def test_schedule_permutation_changes_only_higher_order():
    p = family_probabilities(0.4, 0.8)
    spec = TargetSpec(FAMILY_BASIS, p)
    rho0 = _uniform_superposition(FAMILY_BASIS)
    order = [5, 11, 0, 7, 2, 9, 4, 1, 10, 3, 8, 6]
    tau0 = default_tau(p, 1.0)
    diffs = []
    for k in range(3):
        s = assign_couplings(spec, 1.0, tau0 / 2 ** k)
        n = 16 * 2 ** k
        a = evolve_discrete(s, rho0, n).states[-1]
        b = evolve_discrete(s.permuted(order), rho0, n).states[-1]
        diffs.append(np.linalg.norm(a - b))
    ratios = np.array(diffs[:-1]) / np.array(diffs[1:])
    assert_allclose(ratios, 2.0, atol=0.3)


def test_evolve_discrete_records_once_per_cycle():
    s = _family_schedule()
    res = evolve_discrete(s, _uniform_superposition(FAMILY_BASIS), 5)
    assert res.states.shape == (6, 4, 4)
    assert_allclose(res.times, 12 * s.tau * np.arange(6))
    assert np.all(np.diff(res.fidelity_deviation) < 0)
