import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greedy_ldp import hamiltonian as ham
from greedy_ldp.checks import random_interior_point
from greedy_ldp.errors import HamiltonianDomainError
from oracles import H_by_enumeration, mean_by_enumeration

seeds = st.integers(0, 2**32 - 1)


def _point(seed, D=None, scale=1.0):
    rng = np.random.default_rng(seed)
    D = int(rng.integers(1, 4)) if D is None else D
    return random_interior_point(rng, D, scale)


@settings(max_examples=60)
@given(seeds)
def test_H_matches_increment_enumeration(seed):
    x, a = _point(seed)
    assert ham.H(x, a) == pytest.approx(H_by_enumeration(x, a), rel=1e-10, abs=1e-12)


@given(seeds)
def test_H_vanishes_at_zero_and_mean_is_fluid_field(seed):
    x, _ = _point(seed)
    zero = np.zeros_like(x)
    assert ham.H(x, zero) == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(ham.grad_alpha(x, zero), mean_by_enumeration(x), atol=1e-12)


def _fd(f, z, h):
    out = np.zeros_like(z)
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        out[i] = (f(zp) - f(zm)) / (2 * h)
    return out


@settings(max_examples=50)
@given(seeds)
def test_gradients_against_finite_differences(seed):
    x, a = _point(seed)
    np.testing.assert_allclose(ham.grad_alpha(x, a), _fd(lambda z: ham.H(x, z), a, 1e-5), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(ham.grad_x(x, a), _fd(lambda z: ham.H(z, a), x, 1e-6), rtol=1e-6, atol=1e-7)


@settings(max_examples=40)
@given(seeds)
def test_hessian_against_finite_differences(seed):
    x, a = _point(seed)
    hess = ham.hessian_alpha(x, a)
    fd = np.array([_fd(lambda z: ham.grad_alpha(x, z)[i], a, 1e-5) for i in range(a.size)])
    np.testing.assert_allclose(hess, fd, atol=1e-7)
    assert np.linalg.eigvalsh(hess).min() > -1e-12


@settings(max_examples=40)
@given(seeds, st.floats(0.0, 1.0))
def test_convex_in_alpha(seed, lam):
    x, a = _point(seed, scale=3.0)
    _, b = _point(seed + 1, D=x.size - 3, scale=3.0)
    mid = lam * a + (1 - lam) * b
    assert ham.H(x, mid) <= lam * ham.H(x, a) + (1 - lam) * ham.H(x, b) + 1e-10


def test_extreme_alpha_stays_finite():
    x, _ = _point(3, D=3)
    for a in (np.full(6, 300.0), np.full(6, -300.0), np.r_[0, 0, -500, 500, -500, 500]):
        ev = ham.evaluate(x, a)
        assert np.isfinite(ev.value) and np.all(np.isfinite(ev.grad_alpha)) and np.all(np.isfinite(ev.grad_x))


def test_empty_boundary_is_zero():
    x = np.array([0.4, 1.0, 0.0, 0.0, 0.0])
    a = np.array([0.3, -1.0, 2.0, 1.0, 0.5])
    assert ham.H(x, a) == 0.0
    assert not ham.grad_alpha(x, a).any()
    assert not ham.grad_x(x, a).any()


def test_degree_zero_only():
    # only isolated vertices remain: increment is (1, 0, -1 at e_0)
    x = np.array([0.2, 0.0, 0.5, 0.0])
    a = np.array([0.7, 0.1, 0.4, 0.3])
    assert ham.H(x, a) == pytest.approx(0.7 - 0.4)


def test_domain_error_when_log_argument_negative():
    # sum_j j e_j / u > 1 makes the argument negative for large a_j
    x = np.array([0.0, 1.0, 0.0, 0.0, 0.9])
    with pytest.raises(HamiltonianDomainError):
        ham.H(x, np.array([0.0, 0.0, 0.0, 0.0, 5.0]))


@given(st.integers(2, 8), st.floats(0.05, 1.0), st.floats(1.0, 3.0), st.floats(-3, 3), st.floats(-1, 1),
       st.floats(-1, 1))
def test_regular_form_matches_general(d, x3, slack, a3, a1, a2):
    x2 = d * x3 * slack
    e = np.zeros(d + 1)
    e[d] = x3
    ae = np.zeros(d + 1)
    ae[d] = a3
    general = ham.H(np.r_[0.1, x2, e], np.r_[a1, a2, ae])
    assert ham.H_regular(d, (0.1, x2, x3), (a1, a2, a3)) == pytest.approx(general, abs=1e-12)


def test_value_and_grads_consistent():
    x, a = _point(99, D=4)
    val, ga, gx = ham.value_and_grads(x, a)
    assert val == ham.H(x, a)
    np.testing.assert_array_equal(ga, ham.grad_alpha(x, a))
    np.testing.assert_array_equal(gx, ham.grad_x(x, a))
