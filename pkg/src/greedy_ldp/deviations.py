"""Rate-function optimization over Hamilton trajectories.

For d-regular graphs the stopping time ``T_{a0}`` of the reduced Hamilton
path is increasing in the scalar launch adjoint ``a0``, so deviations of the
stopping time reduce to a 1-d root find.  As ``a0 -> -inf`` the stopping time
decreases to 1/(d+1).  Above a critical ``a0`` (about 0.47 for d = 3) the
adjoint blows up before extinction and ``T_{a0}`` accumulates at 1/2.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidInput, OutOfRange, SingularityError
from .model import Covector, DegreeDistribution, as_array
from .montecarlo import default_threads
from .odeflow import (DEFAULT_STEP, Trajectory, hamilton_path, hamilton_path_regular,
                      jamming_constant, stopping_time_regular)

SEARCH_BOUNDS = (-20.0, 20.0)
TIME_TOL = 1e-8
UPPER, LOWER = "upper", "lower"


@dataclass
class RateCurve:
    d: int
    alpha0_grid: np.ndarray
    F_values: np.ndarray
    T_values: np.ndarray
    errors: dict = field(default_factory=dict)

    @property
    def ok(self) -> np.ndarray:
        return np.isfinite(self.F_values)

    def table(self) -> np.ndarray:
        """Rows ``alpha0, T_alpha0, F`` (NaN where the integration failed)."""
        return np.column_stack([self.alpha0_grid, self.T_values, self.F_values])


def _map(fn, items, threads):
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def rate_curve_regular(d: int, alpha0_range=(-1.0, 1.0), points: int = 41, step: float = DEFAULT_STEP,
                       threads: int | None = None, grid=None) -> RateCurve:
    """``F(a0)`` and ``T_{a0}`` on a uniform grid (or an explicit ``grid``).

    Grid points whose integration fails are reported as NaN with the reason
    in ``errors``; the scan itself never aborts.
    """
    if grid is None:
        if points < 2:
            raise InvalidInput("points must be >= 2")
        a, b = alpha0_range
        if not a < b:
            raise InvalidInput(f"empty range {alpha0_range}")
        grid = np.linspace(a, b, int(points))
    grid = np.asarray(grid, dtype=float)

    def one(a0):
        try:
            sol = hamilton_path_regular(d, a0, step)
            return sol.T_alpha0, sol.action, None
        except SingularityError as exc:
            return np.nan, np.nan, str(exc)

    res = _map(one, list(grid), threads)
    T = np.array([r[0] for r in res])
    F = np.array([r[1] for r in res])
    errors = {float(a): r[2] for a, r in zip(grid, res) if r[2] is not None}
    return RateCurve(d, grid, F, T, errors)


def _T_or_none(d, a0, step):
    try:
        return stopping_time_regular(d, a0, step)
    except SingularityError:
        return None


def alpha0_for_time(d: int, T_target: float, bounds=SEARCH_BOUNDS, tol: float = TIME_TOL,
                    step: float = DEFAULT_STEP) -> float:
    """The launch adjoint ``a0`` with ``T_{a0} = T_target``.

    Bisection on the monotone map ``a0 -> T_{a0}``.  A launch that blows up
    before extinction counts as overshooting in the direction of
    ``sign(a0)``.  Once both ends of the bracket integrate cleanly, Brent's
    method polishes the root.
    """
    if not 0 < T_target < 1:
        raise InvalidInput(f"T_target must lie in (0, 1), got {T_target}")
    lo, hi = map(float, bounds)
    if not lo < 0 < hi:
        raise InvalidInput(f"bounds must straddle 0, got {bounds}")
    if abs(T_target - jamming_constant(d)) <= tol:
        T0 = stopping_time_regular(d, 0.0, step)
        if abs(T0 - T_target) <= tol:
            return 0.0
    T_lo = _T_or_none(d, lo, step)
    if T_lo is not None and T_lo > T_target + tol:
        raise OutOfRange(f"T_target = {T_target} lies below T_(a0={lo}) = {T_lo}")
    T_hi = _T_or_none(d, hi, step)
    if T_hi is not None and T_hi < T_target - tol:
        raise OutOfRange(f"T_target = {T_target} lies above T_(a0={hi}) = {T_hi}")

    def g(a):
        return stopping_time_regular(d, a, step) - T_target

    root = None
    while hi - lo > 1e-13:
        if T_lo is not None and T_hi is not None:
            root = brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
            break
        mid = 0.5 * (lo + hi)
        T_mid = _T_or_none(d, mid, step)
        above = (mid > 0) if T_mid is None else T_mid >= T_target
        if above:
            hi, T_hi = mid, T_mid
        else:
            lo, T_lo = mid, T_mid
    if root is None:
        root = lo if T_lo is not None else hi
    try:
        T_root = stopping_time_regular(d, root, step)
    except SingularityError:
        T_root = np.nan
    if not abs(T_root - T_target) <= tol:
        raise OutOfRange(
            f"T_target = {T_target} is not reachable for d = {d}: the launch adjoint degenerates near a0 = {root:.10g}")
    return float(root)


def epsilon_limit(d: int, side: str = UPPER, bounds=SEARCH_BOUNDS, step: float = DEFAULT_STEP) -> float:
    """Largest deviation ``eps`` of the stopping time reachable from the search bounds.

    Upward, the reachable stopping times accumulate at 1/2 as ``a0``
    approaches its critical value.  Downward, the limit is ``T* - T_{lo}``
    at the lower search bound, which is within 1e-9 of ``T* - 1/(d+1)``.
    The bisection fallback only runs if that launch fails to integrate.
    """
    T = jamming_constant(d)
    if side == UPPER:
        return 0.5 - T
    if side == LOWER:
        lo, hi = float(bounds[0]), 0.0
        T_lo = _T_or_none(d, lo, step)
        if T_lo is not None:
            return T - T_lo
        T_hi = T
        while hi - lo > 1e-9:
            mid = 0.5 * (lo + hi)
            T_mid = _T_or_none(d, mid, step)
            if T_mid is None:
                lo = mid
            else:
                hi, T_hi = mid, T_mid
        return T - T_hi
    raise InvalidInput(f"side must be '{UPPER}' or '{LOWER}'")


def _check_side(d, epsilon, side):
    if side not in (UPPER, LOWER):
        raise InvalidInput(f"side must be '{UPPER}' or '{LOWER}', got {side!r}")
    if not epsilon > 0:
        raise InvalidInput("epsilon must be positive")
    T = jamming_constant(d)
    target = T + epsilon if side == UPPER else T - epsilon
    if not 0 < target < 1:
        raise InvalidInput(f"T* {'+' if side == UPPER else '-'} eps = {target} outside (0, 1)")
    return target


@dataclass(frozen=True)
class DeviationPoint:
    d: int
    epsilon: float
    side: str
    alpha0: float
    T_alpha0: float
    rate: float


def deviation_point(d: int, epsilon: float, side: str = UPPER, step: float = DEFAULT_STEP,
                    bounds=SEARCH_BOUNDS) -> DeviationPoint:
    target = _check_side(d, epsilon, side)
    a0 = alpha0_for_time(d, target, bounds=bounds, step=step)
    sol = hamilton_path_regular(d, a0, step, record=True)
    return DeviationPoint(d, float(epsilon), side, a0, sol.T_alpha0, float(sol.action))


def deviation_rate(d: int, epsilon: float, side: str = UPPER, step: float = DEFAULT_STEP,
                   bounds=SEARCH_BOUNDS) -> float:
    """``F(a0(T* +- eps))``: the exponential decay rate of ``P(T_N*/N >= T*+eps)``
    (``side='upper'``) or ``P(T_N*/N <= T*-eps)`` (``side='lower'``)."""
    return deviation_point(d, epsilon, side, step, bounds).rate


def rate_vs_epsilon(d: int, epsilons, side: str = UPPER, step: float = DEFAULT_STEP,
                    threads: int | None = None) -> np.ndarray:
    """Rows ``eps, a0, T_a0, F`` with NaN where ``T* +- eps`` is unreachable."""
    eps = np.asarray(epsilons, dtype=float)

    def one(e):
        try:
            p = deviation_point(d, e, side, step)
            return e, p.alpha0, p.T_alpha0, p.rate
        except (OutOfRange, SingularityError):
            return e, np.nan, np.nan, np.nan

    return np.array(_map(one, list(eps), threads)).reshape(-1, 4)


# --------------------------------------------------------------------------
# general degree distributions: grid relaxation

def always(traj: Trajectory) -> bool:
    return True


def stopping_time_at_least(T: float):
    """Closure of ``{T_N*/N > T}``: accepts trajectories with ``T_{a0} >= T``."""
    def pred(traj: Trajectory) -> bool:
        return traj.T_star >= T
    pred.__name__ = f"T>={T}"
    return pred


def stopping_time_at_most(T: float):
    """Closure of ``{T_N*/N < T}``: accepts trajectories with ``T_{a0} <= T``."""
    def pred(traj: Trajectory) -> bool:
        return traj.T_star <= T
    pred.__name__ = f"T<={T}"
    return pred


@dataclass
class GridOptimum:
    best_alpha0: np.ndarray | None
    best_F: float
    evaluated: list

    @property
    def feasible(self) -> bool:
        return self.best_alpha0 is not None


def _covector_array(a0, n):
    if isinstance(a0, Covector):
        a0 = a0.to_array()
    a = as_array(a0)
    if a.shape != (n,):
        raise InvalidInput(f"alpha0 grid entries must have length {n}, got shape {a.shape}")
    return a


def optimize_over_set_general_detailed(dist: DegreeDistribution, predicate, alpha0_grid,
                                       step: float = DEFAULT_STEP, threads: int | None = None) -> GridOptimum:
    """Grid relaxation of ``inf {F(a0) : x_{a0} in closure(A)}``.

    Each grid covector launches a full Hamilton path; points whose path
    fails to integrate are recorded in ``evaluated`` and skipped.
    """
    n = dist.max_degree + 3
    grid = [_covector_array(a, n) for a in alpha0_grid]
    if not grid:
        raise InvalidInput("alpha0 grid is empty")

    def one(a0):
        try:
            sol = hamilton_path(dist, a0, step)
        except SingularityError as exc:
            return a0, np.nan, False, str(exc)
        return a0, sol.action, bool(predicate(sol.trajectory)), None

    evaluated = _map(one, grid, threads)
    best, best_F = None, np.inf
    for a0, F, ok, _ in evaluated:
        if ok and F < best_F:
            best, best_F = a0, F
    return GridOptimum(best, float(best_F), evaluated)


def optimize_over_set_general(dist: DegreeDistribution, predicate, alpha0_grid,
                              step: float = DEFAULT_STEP, threads: int | None = None):
    """``(best_alpha0, best_F)``; ``(None, inf)`` when no grid point is feasible."""
    res = optimize_over_set_general_detailed(dist, predicate, alpha0_grid, step, threads)
    return res.best_alpha0, res.best_F
