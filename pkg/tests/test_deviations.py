import numpy as np
import pytest

from greedy_ldp.deviations import (LOWER, UPPER, alpha0_for_time, always, deviation_point, deviation_rate,
                                   epsilon_limit, optimize_over_set_general,
                                   optimize_over_set_general_detailed, rate_curve_regular, rate_vs_epsilon,
                                   stopping_time_at_least, stopping_time_at_most)
from greedy_ldp.errors import InvalidInput, OutOfRange
from greedy_ldp.model import DegreeDistribution, make_regular
from greedy_ldp.montecarlo import ensemble
from greedy_ldp.odeflow import hamilton_path_regular, jamming_constant, stopping_time_regular


def test_alpha0_for_jamming_constant_is_zero():
    for d in (2, 3, 6):
        assert alpha0_for_time(d, jamming_constant(d)) == 0.0


@pytest.mark.parametrize("side,sign", [(UPPER, 1), (LOWER, -1)])
def test_round_trip(side, sign):
    d = 3
    target = jamming_constant(d) + sign * 0.05
    a0 = alpha0_for_time(d, target)
    assert np.sign(a0) == sign
    assert stopping_time_regular(d, a0) == pytest.approx(target, abs=1e-8)


def test_unreachable_targets():
    with pytest.raises(OutOfRange):
        alpha0_for_time(3, 0.6)
    with pytest.raises(OutOfRange):
        alpha0_for_time(3, 0.2)
    for T in (0.0, 1.0, -0.2):
        with pytest.raises(InvalidInput):
            alpha0_for_time(3, T)
    with pytest.raises(InvalidInput):
        alpha0_for_time(3, 0.4, bounds=(0.1, 1.0))


def test_epsilon_limits():
    assert epsilon_limit(3, UPPER) == pytest.approx(0.125)
    # downward, the stopping time can drop to 1/(d+1): every step removes d+1 vertices
    low = epsilon_limit(3, LOWER)
    assert low == pytest.approx(0.375 - 0.25, abs=1e-6)
    a0 = alpha0_for_time(3, 0.26)
    assert a0 < -2
    with pytest.raises(OutOfRange):
        alpha0_for_time(3, 0.249)


def test_rate_curve_shape():
    curve = rate_curve_regular(3, (-1.0, 0.45), points=30, threads=1)
    assert curve.ok.all()
    assert np.all(curve.F_values >= -1e-15)
    assert np.all(np.diff(curve.T_values) > 0)
    i = np.argmin(curve.F_values)
    assert abs(curve.alpha0_grid[i]) < 0.06
    # F decreases towards 0 and increases after
    F = curve.F_values
    assert np.all(np.diff(F[: i + 1]) <= 1e-12) and np.all(np.diff(F[i:]) >= -1e-12)


def test_rate_curve_zero_point():
    curve = rate_curve_regular(3, grid=[0.0])
    assert curve.F_values[0] == pytest.approx(0.0, abs=1e-12)
    assert curve.T_values[0] == pytest.approx(0.375, abs=1e-9)


def test_rate_curve_marks_singular_points():
    curve = rate_curve_regular(3, grid=[-2.0, 0.1, 0.6], threads=1)
    assert np.isnan(curve.F_values[2])
    assert np.isfinite(curve.F_values[:2]).all()
    assert set(curve.errors) == {0.6}
    assert curve.table().shape == (3, 3)


def test_lower_limit_of_stopping_time():
    for d in (2, 3, 10):
        assert stopping_time_regular(d, -20.0) == pytest.approx(1 / (d + 1), abs=1e-7)


def test_rate_curve_validation():
    with pytest.raises(InvalidInput):
        rate_curve_regular(3, (1.0, -1.0))
    with pytest.raises(InvalidInput):
        rate_curve_regular(3, points=1)


def test_rate_increases_with_degree_pointwise():
    grid = [-0.6, -0.3, 0.15, 0.3]
    F2 = rate_curve_regular(2, grid=grid, threads=1).F_values
    F3 = rate_curve_regular(3, grid=grid, threads=1).F_values
    assert np.all(F2 < F3)


@pytest.mark.parametrize("side", [UPPER, LOWER])
def test_rate_monotone_in_epsilon(side):
    rows = rate_vs_epsilon(3, [0.01, 0.02, 0.04, 0.06], side, threads=1)
    assert np.all(np.isfinite(rows))
    assert np.all(np.diff(rows[:, 3]) > 0)


def test_rate_vs_epsilon_unreachable_is_nan():
    rows = rate_vs_epsilon(2, [0.03, 0.1], UPPER, threads=1)
    assert np.isfinite(rows[0, 3]) and np.all(np.isnan(rows[1, 1:]))


def test_rate_continuous_at_zero():
    assert deviation_rate(3, 1e-4, UPPER) < 1e-6
    assert deviation_rate(3, 1e-4, LOWER) < 1e-6


def test_quadratic_rate_matches_fluctuations():
    """For small eps the rate is eps^2 / (2 N Var(T_N*/N)) per vertex."""
    eps = 0.004
    F = 0.5 * (deviation_rate(3, eps, UPPER) + deviation_rate(3, eps, LOWER))
    sigma2 = eps ** 2 / (2 * F)
    res = ensemble(make_regular(3, 2000), 2000, seed=9)
    assert res.N * res.variance == pytest.approx(sigma2, rel=0.15)


def test_deviation_point_fields():
    p = deviation_point(3, 0.05, UPPER)
    assert p.T_alpha0 == pytest.approx(0.425, abs=1e-8)
    assert p.rate == pytest.approx(hamilton_path_regular(3, p.alpha0).action)
    with pytest.raises(InvalidInput):
        deviation_point(3, -0.1)
    with pytest.raises(InvalidInput):
        deviation_point(3, 0.05, "middle")
    with pytest.raises(InvalidInput):
        deviation_point(3, 0.7)


def test_predicates():
    class T:
        T_star = 0.4
    assert always(T)
    assert stopping_time_at_least(0.4)(T) and not stopping_time_at_least(0.41)(T)
    assert stopping_time_at_most(0.4)(T) and not stopping_time_at_most(0.39)(T)


def test_general_optimizer_unconstrained_finds_zero():
    dist = DegreeDistribution(np.array([0.2, 0.3, 0.5]))
    grid = [np.r_[0, 0, 0, 0, a] for a in (-0.05, 0.0, 0.05)]
    best, F = optimize_over_set_general(dist, always, grid, step=2e-3, threads=1)
    assert F == 0.0
    np.testing.assert_array_equal(best, np.zeros(5))


def test_general_optimizer_agrees_with_regular():
    d = 3
    target = jamming_constant(d) + 0.02
    exact = deviation_rate(d, 0.02, UPPER)
    a_star = alpha0_for_time(d, target)
    grid = [np.r_[0, 0, 0, 0, 0, a] for a in np.linspace(0.0, 0.2, 9)]
    best, F = optimize_over_set_general(DegreeDistribution.regular(d), stopping_time_at_least(target), grid,
                                        step=1e-3, threads=1)
    assert best is not None
    # the best feasible grid point is the first grid value past a_star
    assert best[-1] == pytest.approx(np.min([g[-1] for g in grid if g[-1] >= a_star]))
    assert F >= exact - 1e-7
    assert F == pytest.approx(exact, abs=0.01)


def test_general_optimizer_infeasible():
    dist = DegreeDistribution.regular(3)
    grid = [np.zeros(6)]
    best, F = optimize_over_set_general(dist, stopping_time_at_least(0.49), grid, step=2e-3)
    assert best is None and F == np.inf
    detail = optimize_over_set_general_detailed(dist, stopping_time_at_least(0.49), grid, step=2e-3)
    assert not detail.feasible and len(detail.evaluated) == 1


def test_general_optimizer_validation():
    dist = DegreeDistribution.regular(3)
    with pytest.raises(InvalidInput):
        optimize_over_set_general(dist, always, [])
    with pytest.raises(InvalidInput):
        optimize_over_set_general(dist, always, [np.zeros(4)])
