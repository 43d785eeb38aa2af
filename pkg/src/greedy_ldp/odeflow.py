"""Fluid limit and Hamilton trajectories by fixed-step RK4 with event location.

Extinction events (``e_i`` reaching 0) are located by bisecting the length of
the RK4 step that crosses them, so event times are resolved to ``1e-10`` with
the same local accuracy as the integrator.  After its event a coordinate is
frozen at 0; the run stops when the total mass of empty vertices is exhausted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import hamiltonian as ham
from .errors import HamiltonianDomainError, InvalidInput, LeftStateSpace, SingularityError
from .model import DegreeDistribution, as_array, initial_macrostate, validate_in_E

DEFAULT_STEP = 1e-4
MAX_STEP = 1e-2
EXTINCT_TOL = 1e-10
EVENT_TOL = 1e-10
EXIT_TOL = 1e-6
GONE_TOL = 1e-5
INVARIANT_TOL = 1e-10
REDUCED_INVARIANT_TOL = 1e-12  # the reduced system is cheap enough to hold energy tighter
MAX_SPLIT = 10


def jamming_constant(d: int) -> float:
    """Fluid-limit independent-set fraction of the greedy algorithm on d-regular graphs."""
    if d < 2:
        raise InvalidInput("d must be >= 2")
    if d == 2:
        return 0.5 * (1 - np.exp(-2.0))
    return 0.5 * (1 - (1 / (d - 1)) ** (2 / (d - 2)))


def fluid_empty_regular(d: int, t):
    """Closed-form fraction of empty vertices along the d-regular fluid limit."""
    t = np.asarray(t, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        if d == 2:
            e = (1 - 2 * t) * (0.5 * np.log(1 - 2 * t) + 1)
        else:
            e = (2 * t - 1 + (d - 1) * (1 - 2 * t) ** (d / 2)) / (d - 2)
    return np.where(t <= jamming_constant(d), e, 0.0)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # rows [s, u, e_0..e_D]
    stop_times: np.ndarray
    T_star: float
    reached_extinction: bool = True

    def at(self, t: float) -> np.ndarray:
        """State at time ``t`` (linear interpolation); ``(T*, 0, ..., 0)`` after ``T*``."""
        if t > self.T_star:
            out = np.zeros(self.states.shape[1])
            out[0] = self.T_star
            return out
        return np.array([np.interp(t, self.times, col) for col in self.states.T])

    def table(self) -> np.ndarray:
        """Rows ``t, s, u, e_0..e_D`` (shared CSV schema with simulated paths)."""
        return np.column_stack([self.times, self.states])


@dataclass
class HamiltonSolution:
    trajectory: Trajectory
    adjoint: np.ndarray
    alpha0: np.ndarray
    action: float
    T_alpha0: float
    action_path: np.ndarray = field(default=None)
    horizon_reached: bool = False

    def hamiltonian_values(self, d: int | None = None) -> np.ndarray:
        """H(x(t), alpha(t)) along the stored path (d-regular form when ``d`` given)."""
        if d is None:
            return np.array([ham.H(x, a) for x, a in zip(self.trajectory.states, self.adjoint)])
        return np.array([ham.H_regular(d, x, a) for x, a in zip(self.trajectory.states, self.adjoint)])


def _check_step(step):
    if not 0 < step <= MAX_STEP:
        raise InvalidInput(f"step must lie in (0, {MAX_STEP}], got {step}")


def _rk4(f, t, z, h):
    k1 = f(t, z)
    k2 = f(t + h / 2, z + h / 2 * k1)
    k3 = f(t + h / 2, z + h / 2 * k2)
    k4 = f(t + h, z + h * k3)
    return z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate_with_extinction(f, z0, e_slice, active, h, t_end=1.0, check=None, invariant=None):
    """Shared RK4 driver. ``e_slice`` locates the empty-vertex block inside ``z``;
    ``active`` flags coordinates not yet extinct (mutated, also read by ``f``).

    A step whose stages leave the domain of ``f`` is treated like an
    overshoot of an extinction: the step length is bisected and the classes
    whose ``e_j`` reached ``GONE_TOL`` are retired.  If none did, the failure
    is a genuine singularity.  With ``invariant`` (a conserved quantity of
    the flow), steps drifting by more than ``INVARIANT_TOL`` are split in
    halves up to ``MAX_SPLIT`` times; this resolves adjoints that blow up as
    a degree class empties.

    Returns (times, states, stop_times, T, extinct).
    """
    z = z0.copy()
    t = 0.0
    stop = np.where(active, np.inf, 0.0)
    times = [t]
    states = [z.copy()]

    def margin(zz):
        e = zz[e_slice]
        return min(e[active].min(), e[active].sum() - EXTINCT_TOL)

    def rk4(t0, z0, hh):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                zz = _rk4(f, t0, z0, hh)
        except HamiltonianDomainError:
            return None
        return zz if np.all(np.isfinite(zz)) else None

    def advance(t0, z0, inv0, hh, depth):
        zz = rk4(t0, z0, hh)
        if invariant is None:
            return zz
        ok = False
        if zz is not None:
            try:
                inv1 = invariant(zz)
                ok = abs(inv1 - inv0) <= INVARIANT_TOL * (1.0 + abs(inv0))
            except HamiltonianDomainError:
                pass
        if ok:
            return zz
        if depth >= MAX_SPLIT:
            return None
        zm = advance(t0, z0, inv0, hh / 2, depth + 1)
        if zm is None:
            return None
        return advance(t0 + hh / 2, zm, invariant(zm), hh / 2, depth + 1)

    def attempt(hh):
        inv0 = None if invariant is None else invariant(z)
        return advance(t, z, inv0, hh, 0)

    while t < t_end - 1e-15 and active.any():
        hh = min(h, t_end - t)
        z_new = attempt(hh)
        if z_new is None or margin(z_new) <= 0:
            lo, hi = 0.0, hh
            z_lo, z_hi = z, z_new
            while hi - lo > EVENT_TOL:
                mid = 0.5 * (lo + hi)
                z_mid = attempt(mid)
                if z_mid is None or margin(z_mid) <= 0:
                    hi, z_hi = mid, z_mid
                else:
                    lo, z_lo = mid, z_mid
            if z_hi is not None:
                hh, z_new = hi, z_hi
                e = z_new[e_slice]
                gone = active.copy() if e[active].sum() <= EXTINCT_TOL else active & (e <= 0)
            else:
                hh, z_new = lo, z_lo.copy()
                e = z_new[e_slice]
                gone = active.copy() if e[active].sum() <= GONE_TOL else active & (e <= GONE_TOL)
                if not gone.any():
                    raise SingularityError(f"right-hand side left its domain at t = {t + lo:.10g}", t + lo,
                                           z_lo)
            for i in np.flatnonzero(gone):
                stop[i] = t + hh
                active[i] = False
            e = z_new[e_slice]
            e[gone] = 0.0
            z_new[e_slice] = e
        t += hh
        z = z_new
        if check is not None:
            check(t, z)
        times.append(t)
        states.append(z.copy())
    extinct = not active.any()
    T = float(stop[np.isfinite(stop)].max(initial=0.0)) if extinct else t_end
    return np.array(times), np.array(states), stop, T, extinct


def fluid_limit(dist: DegreeDistribution, step: float = DEFAULT_STEP) -> Trajectory:
    """Integrate the zero-cost ODE ``x' = H_alpha(x, 0)`` from ``(0, lam, p)``."""
    _check_step(step)
    x0 = initial_macrostate(dist).to_array()
    D = dist.max_degree
    k = np.arange(D + 1)
    active = x0[2:] > 0

    def f(t, z):
        e = np.where(active, z[2:], 0.0)
        u = z[1]
        esum = e.sum()
        out = np.zeros_like(z)
        out[0] = 1.0
        if esum == 0:
            return out
        ke = (k * e).sum()
        out[1] = -2.0 * ke / esum
        hit = np.zeros_like(e) if u <= 0 else k * e / u * ke
        out[2:] = np.where(active, (-e - hit) / esum, 0.0)
        return out

    times, states, stop, T, extinct = _integrate_with_extinction(f, x0, slice(2, D + 3), active, step)
    return Trajectory(times, states, stop, T, extinct)


def hamilton_path(dist: DegreeDistribution, alpha0, step: float = DEFAULT_STEP) -> HamiltonSolution:
    """Integrate ``x' = H_alpha``, ``alpha' = -H_x`` with running action ``<alpha, x'> - H``.

    The adjoint of an extinct coordinate is frozen with it (H no longer
    depends on it).  H is conserved between extinction events.  A class that
    empties before the others does so with a diverging adjoint, and
    dropping it makes H jump at that event.  Raises :class:`LeftStateSpace`
    if the flow leaves E.
    """
    _check_step(step)
    x0 = initial_macrostate(dist).to_array()
    n = x0.size
    a0 = as_array(alpha0)
    if a0.shape != x0.shape:
        raise InvalidInput(f"alpha0 must have length {n}")
    lam = dist.mean_degree
    active = x0[2:] > 0

    def f(t, z):
        x = z[:n].copy()
        x[2:] = np.where(active, x[2:], 0.0)
        a = z[n:2 * n]
        val, ga, gx = ham.value_and_grads(x, a)
        out = np.empty_like(z)
        out[:n] = ga
        out[2:n] = np.where(active, ga[2:], 0.0)
        out[n:2 * n] = -gx
        out[n + 2:2 * n] = np.where(active, -gx[2:], 0.0)
        out[-1] = a @ ga - val
        return out

    def check(t, z):
        if not validate_in_E(z[:n], lam, EXIT_TOL):
            raise LeftStateSpace(f"Hamilton flow left the state space at t = {t:.10g}", t, z[:n])

    def energy(z):
        x = z[:n].copy()
        x[2:] = np.where(active, x[2:], 0.0)
        return ham.H(x, z[n:2 * n])

    z0 = np.concatenate([x0, a0, [0.0]])
    times, states, stop, T, extinct = _integrate_with_extinction(f, z0, slice(2, n), active, step, check=check,
                                                                 invariant=energy)
    traj = Trajectory(times, states[:, :n], stop[: n - 2], T, extinct)
    return HamiltonSolution(traj, states[:, n:2 * n], a0, float(states[-1, -1]), T,
                            states[:, -1], horizon_reached=not extinct)


# --------------------------------------------------------------------------
# d-regular reduced system in (t, x = e, y = alpha_e)

@njit(cache=True, nogil=True)
def _reduced_rhs(d, t, x, y, out):
    """Returns 0 on success, 1 when the denominator is not negative (singular)."""
    ey = np.exp(y)
    den = ey * (2 * t - 1 + x) - x
    if not den < 0:
        return 1
    out[0] = -1.0 + d * x / den
    out[1] = d * (1.0 - ey) / den
    # adjoint of u: -dH/du with u = d(1-2t), r = x/(1-2t)
    u = d * (1 - 2 * t)
    a = np.expm1(-y)
    out[2] = d * a * d * x / (u * (u + a * d * x))
    r = x / (1 - 2 * t)
    out[3] = (out[0] + 1.0) * y - d * np.log1p(a * r)
    return 0


@njit(cache=True, nogil=True)
def _reduced_step(d, t, z, h, out, k1, k2, k3, k4, tmp):
    if _reduced_rhs(d, t, z[0], z[1], k1):
        return 1
    for i in range(4):
        tmp[i] = z[i] + 0.5 * h * k1[i]
    if _reduced_rhs(d, t + 0.5 * h, tmp[0], tmp[1], k2):
        return 1
    for i in range(4):
        tmp[i] = z[i] + 0.5 * h * k2[i]
    if _reduced_rhs(d, t + 0.5 * h, tmp[0], tmp[1], k3):
        return 1
    for i in range(4):
        tmp[i] = z[i] + h * k3[i]
    if _reduced_rhs(d, t + h, tmp[0], tmp[1], k4):
        return 1
    for i in range(4):
        out[i] = z[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
    return 0


@njit(cache=True, nogil=True)
def _reduced_energy(d, t, z):
    """H along the reduced path; NaN outside the domain of the log."""
    arg = np.expm1(-z[1]) * z[0] / (1 - 2 * t)
    if not arg > -1:
        return np.nan
    return -2 * d * z[2] - z[1] + d * np.log1p(arg)


@njit(cache=True, nogil=True)
def _split_step(d, t, z, h, out, k1, k2, k3, k4, tmp):
    """RK4 over ``[t, t+h]``, halving substeps while the energy drifts.

    Mirrors the invariant control of the general integrator.  At the
    smallest substep ``h / 2**MAX_SPLIT`` a step that stays in the domain is
    accepted whatever its drift; returns 1 only when even that step fails.
    """
    zc = z.copy()
    zs = np.zeros(4)
    pos = 0.0
    sub = h
    floor = h / 2.0 ** MAX_SPLIT
    while h - pos > 1e-15 * h:
        sub = min(sub, h - pos)
        e0 = _reduced_energy(d, t + pos, zc)
        fail = _reduced_step(d, t + pos, zc, sub, zs, k1, k2, k3, k4, tmp)
        if not fail:
            e1 = _reduced_energy(d, t + pos + sub, zs)
            # x' <= -1 inside the domain, so a non-decreasing x is an overshoot artefact
            if not (np.isfinite(e1) and np.isfinite(zs[3]) and zs[0] < zc[0]):
                fail = 1
            elif sub > floor:
                fail = not abs(e1 - e0) <= REDUCED_INVARIANT_TOL * (1.0 + abs(e0))
        if fail and sub <= floor:
            return 1
        if fail:
            sub = max(0.5 * sub, floor)
            continue
        pos += sub
        zc[:] = zs
        sub *= 2.0
    out[:] = zc
    return 0


@njit(cache=True, nogil=True)
def _reduced_integrate(d, alpha0, h, record, path):
    """Integrate from (x, y, alpha_u, action) = (1, alpha0, 0, 0).

    Returns (status, T, rows) with status 0 = extinction, 1 = singular,
    2 = left state space, 3 = horizon. ``path`` rows: [t, x, y, alpha_u, action].
    """
    z = np.array([1.0, alpha0, 0.0, 0.0])
    zn = np.zeros(4)
    k1 = np.zeros(4)
    k2 = np.zeros(4)
    k3 = np.zeros(4)
    k4 = np.zeros(4)
    tmp = np.zeros(4)
    t = 0.0
    rows = 0
    if record:
        path[0, 0] = t
        path[0, 1:] = z
        rows = 1
    t_end = 0.5
    while t < t_end:
        hh = min(h, t_end - t)
        failed = _split_step(d, t, z, hh, zn, k1, k2, k3, k4, tmp)
        if not failed and not (np.isfinite(zn[0]) and np.isfinite(zn[1]) and np.isfinite(zn[3])):
            failed = 1
        if failed or zn[0] <= 0:
            # bisect for the last step that stays strictly inside x > 0
            lo = 0.0
            hi = hh
            while hi - lo > 1e-10 * hh:
                mid = 0.5 * (lo + hi)
                if _split_step(d, t, z, mid, zn, k1, k2, k3, k4, tmp) or not zn[0] > 0:
                    hi = mid
                else:
                    lo = mid
            if lo > 0:
                _split_step(d, t, z, lo, zn, k1, k2, k3, k4, tmp)
            else:
                zn[:] = z
            if not zn[0] > 0 or zn[0] > GONE_TOL or _reduced_rhs(d, t + lo, zn[0], zn[1], k1) or not k1[0] < 0:
                if record:
                    path[rows, 0] = t
                    path[rows, 1:] = z
                return 1, t + lo, rows
            # x reaches 0 with finite speed while y diverges logarithmically;
            # finish the last sliver linearly
            dt = -zn[0] / k1[0]
            t += lo + dt
            zn[2] += dt * k1[2]
            zn[3] += dt * k1[3]
            zn[0] = 0.0
            z[:] = zn
            if record:
                path[rows, 0] = t
                path[rows, 1:] = z
                rows += 1
            return 0, t, rows
        t += hh
        z[:] = zn
        if 1 - 2 * t - z[0] < -1e-9:
            return 2, t, rows
        if record:
            path[rows, 0] = t
            path[rows, 1:] = z
            rows += 1
    return 3, t, rows


def _regular_solution(d, alpha0, h, table, T, horizon) -> HamiltonSolution:
    t = table[:, 0]
    x = table[:, 1]
    states = np.column_stack([t, d * (1 - 2 * t), x])
    adjoint = np.column_stack([np.zeros_like(t), table[:, 3], table[:, 2]])
    stop = np.array([T])
    traj = Trajectory(t, states, stop, T, not horizon)
    return HamiltonSolution(traj, adjoint, np.array([0.0, 0.0, alpha0]), float(table[-1, 4]), T,
                            table[:, 4], horizon_reached=horizon)


def hamilton_path_regular(d: int, alpha0: float, step: float = DEFAULT_STEP, record: bool = True) -> HamiltonSolution:
    """Reduced Hamilton system for d-regular graphs.

    Variables: ``x`` the empty-vertex fraction and ``y`` its adjoint, with
    ``u(t) = d(1-2t)`` and ``s(t) = t`` exact.  The adjoint of ``u`` is also
    integrated so that the returned adjoint matches the full system started at
    ``alpha0 = (0, 0, alpha0)``.  Action uses the first-order condition
    ``L = (x' + 1) y - d log(1 + (e^{-y} - 1) x / (1 - 2t))``.
    """
    if d < 2:
        raise InvalidInput("d must be >= 2")
    _check_step(step)
    alpha0 = float(alpha0)
    rows = int(np.ceil(0.5 / step)) + 3 if record else 1
    path = np.zeros((rows, 5))
    status, T, used = _reduced_integrate(float(d), alpha0, step, True, path)
    if status == 1:
        raise SingularityError(
            f"reduced Hamilton system singular at t = {T:.10g} (x = {path[max(used - 1, 0), 1]:.6g}, "
            f"y = {path[max(used - 1, 0), 2]:.6g}) for alpha0 = {alpha0}", T, path[max(used - 1, 0)])
    if status == 2:
        raise LeftStateSpace(f"reduced Hamilton path left u >= d e at t = {T:.10g} for alpha0 = {alpha0}", T)
    return _regular_solution(d, alpha0, step, path[:used], T, status == 3)


def stopping_time_regular(d: int, alpha0: float, step: float = DEFAULT_STEP) -> float:
    """``T_{alpha0}`` of the reduced system without storing the path."""
    path = np.zeros((1, 5))
    status, T, _ = _reduced_integrate(float(d), float(alpha0), step, False, path)
    if status == 1:
        raise SingularityError(f"reduced Hamilton system singular at t = {T:.10g} for alpha0 = {alpha0}", T)
    if status == 2:
        raise LeftStateSpace(f"reduced Hamilton path left the state space at t = {T:.10g}", T)
    return T
