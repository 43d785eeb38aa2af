import numpy as np
import pytest
from scipy.integrate import simpson

from greedy_ldp import hamiltonian as ham
from greedy_ldp.dynamics import run_to_absorption
from greedy_ldp.errors import InvalidInput, SingularityError
from greedy_ldp.legendre import cost_regular
from greedy_ldp.model import DegreeDistribution, DegreeSequence, make_regular
from greedy_ldp.odeflow import (fluid_empty_regular, fluid_limit, hamilton_path, hamilton_path_regular,
                                jamming_constant, stopping_time_regular)


def test_jamming_constants_closed_forms():
    assert jamming_constant(2) == pytest.approx(0.5 * (1 - np.exp(-2)))
    assert jamming_constant(3) == pytest.approx(0.375)
    assert jamming_constant(4) == pytest.approx(1 / 3)


@pytest.mark.parametrize("d", [2, 3, 4, 7])
def test_fluid_matches_closed_form(d):
    traj = fluid_limit(DegreeDistribution.regular(d))
    T = jamming_constant(d)
    assert traj.T_star == pytest.approx(T, abs=1e-8)
    grid = traj.times[traj.times < T - 1e-3]
    np.testing.assert_allclose(traj.states[: grid.size, 2 + d], fluid_empty_regular(d, grid), atol=1e-10)
    np.testing.assert_allclose(traj.states[:, 1], d * (1 - 2 * traj.times), atol=1e-10)
    np.testing.assert_allclose(traj.states[:, 0], traj.times, atol=1e-12)
    assert traj.states[-1, 2:].sum() == 0


def test_fluid_after_extinction_is_frozen():
    traj = fluid_limit(DegreeDistribution.regular(3))
    x = traj.at(0.9)
    assert x[0] == pytest.approx(0.375) and x[2:].sum() == 0


def test_fluid_tracks_large_simulation():
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    dist = DegreeDistribution(probs)
    traj = fluid_limit(dist)
    N = 40_000
    seq = DegreeSequence.from_distribution(dist, N)
    sims = [run_to_absorption(seq, s).rescaled() for s in range(3)]
    for t in (0.1, 0.2, 0.3):
        x = traj.at(t)
        for path in sims:
            row = path[np.searchsorted(path[:, 0], t)]
            np.testing.assert_allclose(row[1:], x, atol=0.01)
    T_sim = np.mean([p[-1, 0] for p in sims])
    assert T_sim == pytest.approx(traj.T_star, abs=0.005)


def test_mixed_distribution_classes_vanish_together():
    # every class is drained at a rate proportional to its share, so all hit zero at T*
    traj = fluid_limit(DegreeDistribution(np.array([0.0, 0.3, 0.3, 0.4])))
    stops = traj.stop_times[1:]
    assert np.ptp(stops) < 1e-6
    assert traj.T_star == pytest.approx(stops.max())


def test_step_validation():
    with pytest.raises(InvalidInput):
        fluid_limit(DegreeDistribution.regular(3), step=0.5)
    with pytest.raises(InvalidInput):
        hamilton_path_regular(1, 0.1)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_zero_launch_reproduces_fluid(d):
    sol = hamilton_path_regular(d, 0.0)
    assert sol.action == pytest.approx(0.0, abs=1e-12)
    assert sol.T_alpha0 == pytest.approx(jamming_constant(d), abs=1e-8)
    t = sol.trajectory.times[:-1]
    np.testing.assert_allclose(sol.trajectory.states[:-1, 2], fluid_empty_regular(d, t), atol=1e-9)


def test_general_zero_launch_equals_fluid():
    dist = DegreeDistribution(np.array([0.1, 0.2, 0.3, 0.4]))
    sol = hamilton_path(dist, np.zeros(6), step=1e-3)
    fl = fluid_limit(dist, step=1e-3)
    np.testing.assert_allclose(sol.trajectory.states, fl.states, atol=1e-12)
    assert sol.action == 0.0
    assert not np.any(sol.adjoint)


@pytest.mark.parametrize("a0", [-0.8, -0.3, 0.2, 0.4])
def test_reduced_and_general_systems_agree(a0):
    d = 3
    red = hamilton_path_regular(d, a0, step=1e-3)
    gen = hamilton_path(DegreeDistribution.regular(d), np.r_[0, 0, 0, 0, 0, a0], step=1e-3)
    assert gen.T_alpha0 == pytest.approx(red.T_alpha0, abs=1e-7)
    assert gen.action == pytest.approx(red.action, abs=1e-7)
    np.testing.assert_allclose(gen.adjoint[:-1, 1], red.adjoint[:-1, 1], atol=1e-7)


@pytest.mark.parametrize("a0", [-0.6, 0.3])
def test_hamiltonian_conserved(a0):
    d = 3
    sol = hamilton_path_regular(d, a0)
    Hs = sol.hamiltonian_values(d)[:-1]
    assert np.ptp(Hs) < 1e-8
    gen = hamilton_path(DegreeDistribution.regular(d), np.r_[0.1, -0.05, 0, 0, 0, a0], step=1e-3)
    Hg = gen.hamiltonian_values()[:-1]
    assert np.ptp(Hg) < 1e-7


def test_mixed_law_energy_conserved_between_events():
    dist = DegreeDistribution(np.array([0.0, 0.5, 0.5]))
    sol = hamilton_path(dist, np.r_[0, 0, 0, 0, -0.1], step=1e-3)
    t = sol.trajectory.times
    Hs = sol.hamiltonian_values()
    events = sol.trajectory.stop_times[1:]
    first = events.min()
    before = t < first - 1e-9
    assert np.ptp(Hs[before]) < 1e-7
    assert sol.T_alpha0 == pytest.approx(events.max())


@pytest.mark.parametrize("d,a0", [(3, 0.3), (3, -0.5), (2, -1.0), (5, 0.2)])
def test_action_equals_lagrangian_quadrature(d, a0):
    """Action vs Simpson quadrature of the closed-form cost at numerically differentiated velocities."""
    sol = hamilton_path_regular(d, a0, step=1e-4)
    t = sol.trajectory.times[:-1]
    x = sol.trajectory.states[:-1]
    xdot = np.gradient(x[:, 2], t, edge_order=2)
    # at t = 0 the launch sits on the boundary u = d e where the cost is infinite off the fluid,
    # so the first interval uses the trapezoid rule with the value at the second node
    L = np.array([cost_regular(d, xi, (1.0, -2.0 * d, b)).value for xi, b in zip(x[1:], xdot[1:])])
    head = (t[1] - t[0]) * L[0]
    tail = (sol.trajectory.times[-1] - t[-1]) * L[-1]
    assert head + simpson(L, x=t[1:]) + tail == pytest.approx(sol.action, rel=1e-4, abs=1e-6)


def test_action_positive_away_from_zero():
    for a0 in (-1.0, -0.2, 0.1, 0.4):
        assert hamilton_path_regular(3, a0).action > 0


def test_singular_launch_raises():
    # for d = 3 the adjoint blows up before extinction once a0 exceeds ~0.47
    with pytest.raises(SingularityError):
        hamilton_path_regular(3, 0.5)
    with pytest.raises(SingularityError):
        stopping_time_regular(2, 0.4)


def test_strongly_negative_launch_reaches_extinction():
    # the adjoint diverges like log(x) at extinction, which is integrable
    sol = hamilton_path_regular(3, -5.0)
    assert sol.T_alpha0 == pytest.approx(0.2505, abs=1e-3)
    assert sol.adjoint[-2, 2] < -8
    assert np.isfinite(sol.action)


def test_stopping_time_monotone_inside_window():
    grid = np.linspace(-1.2, 0.45, 25)
    T = np.array([stopping_time_regular(3, a) for a in grid])
    assert np.all(np.diff(T) > 0)


def test_launch_state_and_adjoint_layout():
    sol = hamilton_path_regular(3, 0.3)
    np.testing.assert_allclose(sol.trajectory.states[0], [0.0, 3.0, 1.0])
    np.testing.assert_allclose(sol.adjoint[0], [0.0, 0.0, 0.3])
    assert sol.trajectory.states[-1, 2] == 0.0


def test_reduced_path_solves_full_equations():
    """Velocities of the reduced path equal H_alpha of the embedded full state."""
    d, a0 = 3, 0.25
    sol = hamilton_path_regular(d, a0)
    t = sol.trajectory.times
    x = sol.trajectory.states
    i = len(t) // 2
    full_x = np.r_[x[i, :2], 0, 0, 0, x[i, 2]]
    full_a = np.r_[sol.adjoint[i, :2], 0, 0, 0, sol.adjoint[i, 2]]
    v = ham.grad_alpha(full_x, full_a)
    xdot = (x[i + 1, 2] - x[i - 1, 2]) / (t[i + 1] - t[i - 1])
    assert v[5] == pytest.approx(xdot, rel=1e-6)
    ydot = (sol.adjoint[i + 1, 2] - sol.adjoint[i - 1, 2]) / (t[i + 1] - t[i - 1])
    assert -ham.grad_x(full_x, full_a)[5] == pytest.approx(ydot, rel=1e-6)


@pytest.mark.parametrize("a0", [0.3, 0.45, -0.5])
def test_action_matches_reduced_cost_quadrature(a0):
    """Simpson quadrature of the empties-only cost at the exact Hamilton velocities."""
    from greedy_ldp.legendre import cost_E_reduced
    d = 3
    sol = hamilton_path_regular(d, a0, step=1e-4)
    t = sol.trajectory.times[:-1]
    x = sol.trajectory.states[:-1]
    a = sol.adjoint[:-1]
    v = np.array([ham.grad_alpha(np.r_[xi[:2], 0, 0, 0, xi[2]], np.r_[ai[:2], 0, 0, 0, ai[2]])[5]
                  for xi, ai in zip(x, a)])
    L = np.array([cost_E_reduced(d, ti, xi[2], vi) for ti, xi, vi in zip(t, x, v)])
    tail = (sol.trajectory.times[-1] - t[-1]) * L[-1]
    assert simpson(L, x=t) + tail == pytest.approx(sol.action, abs=1e-6)
