"""Log-moment generating function of the one-step increment and its derivatives.

For a state ``x = (s, u, e_0..e_D)`` with ``sum(e) > 0`` the Hamiltonian is::

    H(x, a) = log sum_k e_k/sum(e) * exp(a_s - 2k a_u - a_k) * g(a)^k
    g(a)    = 1 + sum_j (exp(-a_j) - 1) j e_j / u

i.e. the log-MGF of the increment of a vertex of degree ``k`` chosen with
probability ``e_k / sum(e)`` whose ``k`` half-edges independently land on a
blocked vertex (probability ``1 - sum_j j e_j/u``) or on an empty vertex of
degree ``j`` (probability ``j e_j / u``).  ``H = 0`` when ``sum(e) = 0``.

Everything is evaluated in log-sum-exp form.  All vectors use the flat layout
``[s, u, e_0, ..., e_D]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HamiltonianDomainError
from .model import as_array

EMPTY_TOL = 1e-14
_RATIO_SLACK = 1e-12


@dataclass(frozen=True)
class HamiltonianEval:
    value: float
    grad_alpha: np.ndarray
    grad_x: np.ndarray


class _Parts:
    """Shared intermediate quantities for one (x, alpha) pair.

    Sums over degrees use ``e_k * exp(t_k - max t)`` rather than logs of
    ``e_k``, so slightly negative ``e_k`` (RK4 stages overshooting an
    extinction) give the analytic continuation instead of a jump.
    """

    __slots__ = ("empty", "D", "u", "e", "esum", "c", "logg", "terms", "logS", "w", "rho", "k", "_logratio", "_m", "_S")

    def __init__(self, x, alpha):
        x = as_array(x)
        alpha = as_array(alpha)
        if x.shape != alpha.shape or x.size < 3:
            raise ValueError(f"shape mismatch: x {x.shape}, alpha {alpha.shape}")
        e = x[2:]
        D = e.size - 1
        self.D = D
        self.e = e
        self.u = u = x[1]
        self.esum = esum = e.sum()
        self.empty = abs(esum) < EMPTY_TOL
        if self.empty:
            return
        k = _arange(D + 1)
        self.k = k
        je = k * e
        nzc = je != 0
        if nzc.any():
            if u <= 0:
                raise HamiltonianDomainError("u must be positive when empty vertices of degree >= 1 remain")
            c = je / u
        else:
            c = np.zeros(D + 1)
        self.c = c
        a_e = alpha[2:]
        r = c.sum()
        if r > 1 and r - 1 < _RATIO_SLACK:
            r = 1.0
        # g = (1 - r) + sum_j c_j exp(-a_j), shifted by the largest exponent
        shift = max(0.0, float((-a_e[nzc]).max())) if nzc.any() else 0.0
        ex = np.where(nzc, np.exp(-a_e - shift), 0.0)
        inner = (1.0 - r) * np.exp(-shift) + np.dot(c, ex)
        if not inner > 0:
            raise HamiltonianDomainError(
                f"log argument 1 + sum_j (exp(-a_j)-1) j e_j/u is not positive ({float(inner)!r} * e^{shift})"
            )
        self.logg = logg = shift + np.log(inner)
        self.rho = c * ex / inner
        psi = alpha[0] - 2 * k * alpha[1] - a_e + k * logg
        self.terms = psi
        nz = e != 0
        m = psi[nz].max()
        sk = np.where(nz, e * np.exp(np.where(nz, psi, m) - m), 0.0)
        S = sk.sum()
        ratio = S / esum
        if not ratio > 0:
            raise HamiltonianDomainError("mixture weights lost positivity")
        self.logS = m + np.log(abs(S))
        self._m = m
        self._S = S
        self.w = sk / S
        self._logratio = m + np.log(ratio)


_AR = {}


def _arange(n):
    a = _AR.get(n)
    if a is None:
        a = _AR[n] = np.arange(n, dtype=float)
    return a


def H(x, alpha) -> float:
    p = _Parts(x, alpha)
    if p.empty:
        return 0.0
    return float(p._logratio)


def grad_alpha(x, alpha) -> np.ndarray:
    """Partial derivatives of H with respect to ``(a_s, a_u, a_0..a_D)``.

    This is the mean of the exponentially tilted increment; at ``alpha = 0`` it
    is the fluid-limit velocity field.
    """
    p = _Parts(x, alpha)
    return _grad_alpha(p)


def _grad_alpha(p: _Parts) -> np.ndarray:
    g = np.zeros(p.D + 3)
    if p.empty:
        return g
    m1 = np.dot(p.k, p.w)
    g[0] = 1.0
    g[1] = -2.0 * m1
    g[2:] = -p.w - m1 * p.rho
    return g


def grad_x(x, alpha) -> np.ndarray:
    """Partial derivatives of H with respect to ``(s, u, e_0..e_D)``.

    Coordinates of degrees whose ``e_j`` enters only through ``j e_j / u``
    with ``u = 0`` are reported as 0 (they are frozen at the boundary).
    """
    p = _Parts(x, alpha)
    return _grad_x(p, as_array(alpha))


def _grad_x(p: _Parts, alpha) -> np.ndarray:
    g = np.zeros(p.D + 3)
    if p.empty:
        return g
    m1 = np.dot(p.k, p.w)
    if p.u > 0:
        # (g - 1)/g = 1 - 1/g
        g[1] = -(-np.expm1(-p.logg)) * m1 / p.u
        a = np.expm1(-alpha[2:])
        g[2:] = a * p.k * m1 / (p.u * np.exp(p.logg))
    with np.errstate(over="ignore"):
        g[2:] += np.exp(p.terms - p._m) / p._S - 1.0 / p.esum
    return g


def hessian_alpha(x, alpha) -> np.ndarray:
    """Second derivatives of H in alpha (covariance of the tilted increment)."""
    p = _Parts(x, alpha)
    n = p.D + 3
    if p.empty:
        return np.zeros((n, n))
    sup = np.flatnonzero(p.w != 0)
    G = np.zeros((sup.size, n))
    G[:, 0] = 1.0
    G[:, 1] = -2.0 * sup
    G[:, 2:] = -np.outer(sup, p.rho)
    G[np.arange(sup.size), 2 + sup] -= 1.0
    w = p.w[sup]
    mean = w @ G
    hess = (G * w[:, None]).T @ G - np.outer(mean, mean)
    curv = np.dot(w, sup) * (np.diag(p.rho) - np.outer(p.rho, p.rho))
    hess[2:, 2:] += curv
    return 0.5 * (hess + hess.T)


def evaluate(x, alpha) -> HamiltonianEval:
    p = _Parts(x, alpha)
    val = 0.0 if p.empty else float(p._logratio)
    return HamiltonianEval(val, _grad_alpha(p), _grad_x(p, as_array(alpha)))


def value_and_grads(x, alpha):
    """``(H, H_alpha, H_x)`` sharing one evaluation of the intermediate terms."""
    ev = evaluate(x, alpha)
    return ev.value, ev.grad_alpha, ev.grad_x


def H_regular(d: int, x, alpha) -> float:
    """Hamiltonian of the d-regular model on ``x = (s, u, e)``, ``alpha = (a1, a2, a3)``."""
    x1, x2, x3 = x
    a1, a2, a3 = alpha
    if x3 <= 0:
        return 0.0
    base = 1.0 + np.expm1(-a3) * d * x3 / x2
    if not base > 0:
        raise HamiltonianDomainError(f"log argument {base!r} is not positive")
    return float(a1 - 2 * d * a2 - a3 + d * np.log(base))
