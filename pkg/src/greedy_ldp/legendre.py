"""Cost function ``L(x, beta) = sup_alpha <alpha, beta> - H(x, alpha)``.

For d-regular graphs the supremum has a closed form (:func:`cost_regular`).
For general degree laws :func:`cost_general` maximises the concave dual
objective with damped Newton steps restricted to the affine hull of the
increment's support; directions outside that hull are recession directions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hamiltonian as ham
from .errors import InvalidInput, NumericalFailure
from .model import as_array

FINITE = "finite"
INFINITE = "infinite-escaping"
BOUNDARY = "boundary"

_EXACT = 1e-12
RECESSION_NORM = 1e3
MAX_STEP = 50.0


@dataclass(frozen=True)
class CostEval:
    value: float
    maximizer: np.ndarray | None
    status: str

    @property
    def finite(self) -> bool:
        return np.isfinite(self.value)


_INF = CostEval(np.inf, None, INFINITE)


def cost_regular(d: int, x, beta) -> CostEval:
    """Closed-form cost for the d-regular model, ``x = (s, u, e)``, ``beta`` likewise.

    With ``r = d e / u`` and ``c = beta_3 + 1`` the maximiser is
    ``a* = log[(r / (r - 1)) (d / c + 1)]``, finite for ``-d < c < 0``.  The
    endpoints are the limits ``a* -> +inf`` (``c = 0``: every stub hits a
    blocked vertex, cost ``-d log(1 - r)``) and ``a* -> -inf`` (``c = -d``:
    every stub hits an empty vertex, cost ``-d log r``).
    """
    if d < 2:
        raise InvalidInput("d must be >= 2")
    x1, x2, x3 = (float(v) for v in x)
    b1, b2, b3 = (float(v) for v in beta)
    if x3 < 0 or x2 < d * x3 * (1 - 1e-12) - 1e-15:
        raise InvalidInput(f"state (u={x2}, e={x3}) violates u >= d e")
    if x3 == 0:
        return CostEval(0.0, None, FINITE) if b3 == 0 else _INF
    if abs(b1 - 1) > _EXACT or abs(b2 + 2 * d) > _EXACT * 2 * d:
        return _INF
    r = min(d * x3 / x2, 1.0)
    c = b3 + 1.0
    if c > _EXACT or c < -d - _EXACT * d:
        return _INF
    if r == 1.0:
        # no blocked stubs: each of the d stubs hits an empty vertex
        return CostEval(0.0, None, BOUNDARY) if abs(c + d) <= _EXACT * d else _INF
    if abs(c) <= _EXACT:
        return CostEval(float(-d * np.log1p(-r)), None, BOUNDARY)
    if abs(c + d) <= _EXACT * d:
        return CostEval(float(-d * np.log(r)), None, BOUNDARY)
    a3 = np.log((r / (r - 1.0)) * (d / c + 1.0))
    value = c * a3 - d * np.log1p(np.expm1(-a3) * r)
    return CostEval(float(value), np.array([0.0, 0.0, a3]), FINITE)


def cost_E_reduced(d: int, t: float, x: float, y: float) -> float:
    """Cost of the empties-only process: ``L((t, u(t), x), (1, -2d, y))``, ``u(t) = d(1 - 2t)``."""
    if not 0 <= t <= 1:
        raise InvalidInput("t must lie in [0, 1]")
    u = d * (1 - 2 * t)
    return cost_regular(d, (t, u, x), (1.0, -2.0 * d, y)).value


def _support_frame(x):
    """Mean, orthonormal basis of the covariance range, and its eigenvalues at alpha=0."""
    zero = np.zeros_like(x)
    mu = ham.grad_alpha(x, zero)
    cov = ham.hessian_alpha(x, zero)
    vals, vecs = np.linalg.eigh(cov)
    keep = vals > 1e-12 * max(1.0, vals.max(initial=0.0))
    return mu, vecs[:, keep]


def cost_general(x, beta, max_iter: int = 500, tol: float = 1e-8, alpha_init=None) -> CostEval:
    """Numerical Legendre transform of H(x, .) at ``beta``.

    Returns +inf (status ``infinite-escaping``) when ``beta`` lies outside the
    closed convex hull of the increment support, detected either by leaving its
    affine hull or by the iterate escaping past ``|alpha| = 1e3`` while the
    objective still increases.  A finite supremum approached only as
    ``|alpha| -> inf`` is reported with status ``boundary``.
    """
    x = as_array(x)
    beta = as_array(beta)
    if x.shape != beta.shape:
        raise InvalidInput("x and beta must have the same length")
    if x[2:].sum() < ham.EMPTY_TOL:
        return CostEval(0.0, np.zeros_like(x), FINITE) if np.all(np.abs(beta) <= _EXACT) else _INF
    if abs(beta[0] - 1.0) > _EXACT:
        return _INF
    mu, V = _support_frame(x)
    diff = beta - mu
    scale = 1.0 + np.abs(beta).max()
    if np.abs(diff - V @ (V.T @ diff)).max() > 1e-9 * scale:
        return _INF
    if V.shape[1] == 0:
        return CostEval(0.0, np.zeros_like(x), FINITE)

    def objective(g):
        a = V @ g
        return float(a @ beta - ham.H(x, a))

    g = np.zeros(V.shape[1]) if alpha_init is None else V.T @ as_array(alpha_init)
    f = objective(g)
    for _ in range(max_iter):
        a = V @ g
        grad = V.T @ (beta - ham.grad_alpha(x, a))
        gnorm = np.linalg.norm(grad)
        if gnorm < tol * scale:
            hess = V.T @ ham.hessian_alpha(x, a) @ V
            weak = np.linalg.eigvalsh(hess).min() < 1e-6
            status = BOUNDARY if weak and np.linalg.norm(a) > 10 else FINITE
            return CostEval(f, a, status)
        hess = V.T @ ham.hessian_alpha(x, a) @ V
        lam = 1e-12 * max(1.0, np.abs(hess).max())
        try:
            step = np.linalg.solve(hess + lam * np.eye(hess.shape[0]), grad)
        except np.linalg.LinAlgError:
            step = grad
        if step @ grad <= 0:
            step = grad
        n = np.linalg.norm(step)
        if n > MAX_STEP:
            step *= MAX_STEP / n
        t = 1.0
        while True:
            g_new = g + t * step
            f_new = objective(g_new)
            if f_new >= f + 1e-4 * t * (step @ grad) or t < 1e-12:
                break
            t *= 0.5
        gain = f_new - f
        if f_new < f:
            # line search stalled at round-off level
            hess_ok = np.linalg.eigvalsh(hess).min() > 0
            if gnorm < 1e-6 and hess_ok:
                return CostEval(f, a, FINITE)
            raise NumericalFailure(f"line search failed (|grad| = {gnorm:.3g})")
        if gain <= 0 and gnorm < 1e-6 * scale:
            # Newton has stalled at round-off level
            return CostEval(f, a, FINITE)
        g, f = g_new, f_new
        if np.linalg.norm(V @ g) > RECESSION_NORM and gain > 1e-12:
            return _INF
    raise NumericalFailure(f"no convergence after {max_iter} iterations (|grad| = {gnorm:.3g})")


def binomial_rate(n: int, p: float, m: float) -> float:
    """Cramer rate of a Binomial(n, p) mean at ``m`` (``n * KL(m/n || p)``)."""
    if m < 0 or m > n:
        return np.inf
    out = 0.0
    if m > 0:
        out += m * np.log(m / (n * p)) if p > 0 else np.inf
    if m < n:
        out += (n - m) * np.log((n - m) / (n * (1 - p))) if p < 1 else np.inf
    return float(out)
