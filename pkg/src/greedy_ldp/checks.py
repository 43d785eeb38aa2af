"""Built-in numerical cross-checks (run by ``greedy-ldp validate``)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hamiltonian as ham
from .dynamics import ChainState, cascade_step_law
from .legendre import FINITE, cost_general, cost_regular
from .model import DegreeDistribution, DegreeSequence
from .montecarlo import literal_step_law
from .odeflow import fluid_limit, jamming_constant


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: worst {self.worst:.3g} (tol {self.tolerance:g})"


def random_interior_point(rng: np.random.Generator, D: int, alpha_scale: float = 1.0):
    """A state strictly inside E with every ``e_j > 0`` and ``u > sum j e_j``,
    plus a covector with entries uniform in ``[-alpha_scale, alpha_scale]``."""
    e = rng.uniform(0.02, 1.0, D + 1)
    e *= rng.uniform(0.1, 1.0) / e.sum()
    je = np.dot(np.arange(D + 1), e)
    u = je * rng.uniform(1.05, 3.0) + 1e-3
    x = np.concatenate(([rng.uniform(0, 1), u], e))
    alpha = rng.uniform(-alpha_scale, alpha_scale, D + 3)
    return x, alpha


def _central(f, z, h):
    g = np.zeros_like(z)
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        g[i] = (f(zp) - f(zm)) / (2 * h)
    return g


def gradient_check(points: int = 100, seed: int = 0, tol: float = 1e-6) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        D = int(rng.integers(1, 6))
        x, a = random_interior_point(rng, D)
        ga = ham.grad_alpha(x, a)
        gx = ham.grad_x(x, a)
        fa = _central(lambda z: ham.H(x, z), a, 1e-5)
        fx = _central(lambda z: ham.H(z, a), x, 1e-6)
        scale = max(1.0, np.abs(ga).max(), np.abs(gx).max())
        worst = max(worst, np.abs(ga - fa).max() / scale, np.abs(gx - fx).max() / scale)
    return CheckResult("gradients vs central differences", worst < tol, worst, tol)


def duality_check(points: int = 100, seed: int = 1, tol: float = 1e-6) -> CheckResult:
    """``L(x, H_alpha) + H = <alpha, H_alpha>`` at random interior points."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        D = int(rng.integers(1, 5))
        x, a = random_interior_point(rng, D)
        beta = ham.grad_alpha(x, a)
        c = cost_general(x, beta)
        gap = np.inf if c.status != FINITE else abs(c.value + ham.H(x, a) - a @ beta)
        worst = max(worst, gap)
    return CheckResult("Legendre duality", worst < tol, worst, tol)


def regular_cost_check(points: int = 100, seed: int = 2, tol: float = 1e-6) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        d = int(rng.integers(2, 8))
        x3 = rng.uniform(0.05, 0.9)
        x2 = d * x3 * rng.uniform(1.05, 3.0)
        beta3 = rng.uniform(-d + 0.05, -1.05)
        closed = cost_regular(d, (rng.uniform(0, 0.5), x2, x3), (1.0, -2 * d, beta3)).value
        e = np.zeros(d + 1)
        e[d] = x3
        beta_e = np.zeros(d + 1)
        beta_e[d] = beta3
        general = cost_general(np.concatenate(([0.0, x2], e)), np.concatenate(([1.0, -2 * d], beta_e))).value
        worst = max(worst, abs(closed - general))
    return CheckResult("closed-form d-regular cost vs general", worst < tol, worst, tol)


def _small_states(max_half_edges: int = 8):
    for degrees in ([0], [1, 1], [2, 2, 2], [2, 2, 2, 2], [3, 3, 3, 3], [0, 1, 1, 2], [1, 1, 2, 2], [1, 2, 3]):
        seq = DegreeSequence(np.array(degrees))
        if seq.half_edges <= max_half_edges:
            yield ChainState.initial(seq)


def kernel_check() -> CheckResult:
    """Cascade and literal one-step kernels agree exactly on small initial states."""
    bad = 0
    n = 0
    for st in _small_states(12):
        n += 1
        if cascade_step_law(st) != literal_step_law(st):
            bad += 1
    return CheckResult(f"one-step kernel equivalence ({n} states)", bad == 0, float(bad), 0)


def fluid_check(tol: float = 1e-6) -> CheckResult:
    worst = 0.0
    for d in (2, 3, 4):
        worst = max(worst, abs(fluid_limit(DegreeDistribution.regular(d)).T_star - jamming_constant(d)))
    return CheckResult("fluid extinction times vs jamming constants", worst < tol, worst, tol)


def run_all(points: int = 100) -> list:
    return [
        gradient_check(points),
        duality_check(points),
        regular_cost_check(points),
        kernel_check(),
        fluid_check(),
    ]
