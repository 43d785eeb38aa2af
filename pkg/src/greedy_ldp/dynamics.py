"""Greedy independent-set exploration on a configuration model.

The chain state is kept as counts only: the number of empty vertices of each
degree, the number of vertices already in the independent set, the number of
blocked vertices and the total number of unpaired half-edges.  Every empty
vertex still owns all of its half-edges, so the unpaired half-edges split into
``j * E[j]`` stubs on empty vertices of degree ``j`` plus a pool on blocked
vertices.  Drawing a uniform partner stub is then an O(D) choice among these
classes, which is exact in law because vertices of equal degree are
exchangeable.

Two samplers are provided.  :func:`step_exact` pairs the stubs of the chosen
vertex one at a time (a literal simulation of the urn).  :func:`step_cascade`
draws the same transition through the hypergeometric cascade: number of loops,
number of pairings into blocked vertices, per-degree pairings into empty
vertices and finally the number of distinct empty vertices hit.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from math import comb
from pathlib import Path

import numpy as np
from numba import njit

from .errors import ContractViolation, InvalidInput
from .model import DegreeSequence, as_array


def make_rng(seed=None) -> np.random.Generator:
    """Counter-based (Philox) generator; a Generator passes through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


# --------------------------------------------------------------------------
# compiled kernels

@njit(cache=True, nogil=True)
def _step_kernel(E, st, uni, pos, W, Wt):
    """One exploration step on count arrays, consuming uniforms from ``uni``.

    E: empty counts by degree (mutated). st: [S, U, blocked, blocked_stubs]
    (mutated). W, Wt: per-degree pairings into empties / newly blocked
    vertices (overwritten). Returns (pos, k, H, B).
    """
    D = E.size - 1
    n_empty = 0
    for j in range(D + 1):
        n_empty += E[j]
    idx = int(uni[pos] * n_empty)
    pos += 1
    k = 0
    while idx >= E[k]:
        idx -= E[k]
        k += 1
    E[k] -= 1
    st[0] += 1
    for j in range(D + 1):
        W[j] = 0
        Wt[j] = 0
    if k == 0:
        return pos, 0, 0, 0
    # stubs of vertices hit during this step, by original degree
    fresh_pool = np.zeros(D + 1, dtype=np.int64)
    U = st[1]
    own = k
    H = 0
    B = 0
    for _ in range(k):
        if own == 0:
            break
        own -= 1
        avail = U - 1
        idx = int(uni[pos] * avail)
        pos += 1
        U -= 2
        if idx < own:
            own -= 1
            continue
        H += 1
        idx -= own
        if idx < st[3]:
            st[3] -= 1
            B += 1
            continue
        idx -= st[3]
        for j in range(1, D + 1):
            if idx < fresh_pool[j]:
                fresh_pool[j] -= 1
                W[j] += 1
                break
            idx -= fresh_pool[j]
            if idx < j * E[j]:
                E[j] -= 1
                fresh_pool[j] += j - 1
                W[j] += 1
                Wt[j] += 1
                st[2] += 1
                break
            idx -= j * E[j]
    for j in range(D + 1):
        st[3] += fresh_pool[j]
    st[1] = U
    return pos, k, H, B


@njit(cache=True, nogil=True)
def _run_kernel(E0, U0, uni, thin, path):
    """Run to absorption; returns T. Rows ``[n, S, U, E_0..E_D]`` go to ``path``
    every ``thin`` steps (and at absorption) while rows remain."""
    D = E0.size - 1
    E = E0.copy()
    st = np.zeros(4, dtype=np.int64)
    st[1] = U0
    st[3] = U0
    for j in range(D + 1):
        st[3] -= j * E[j]
    W = np.zeros(D + 1, dtype=np.int64)
    Wt = np.zeros(D + 1, dtype=np.int64)
    pos = 0
    n = 0
    row = 0
    record = path.shape[0] > 0
    n_empty = 0
    for j in range(D + 1):
        n_empty += E[j]
    while True:
        if record and (n % thin == 0 or n_empty == 0) and row < path.shape[0]:
            path[row, 0] = n
            path[row, 1] = st[0]
            path[row, 2] = st[1]
            for j in range(D + 1):
                path[row, 3 + j] = E[j]
            row += 1
        if n_empty == 0:
            break
        pos, k, H, B = _step_kernel(E, st, uni, pos, W, Wt)
        n += 1
        n_empty -= 1
        for j in range(D + 1):
            n_empty -= Wt[j]
    return n


@njit(cache=True, nogil=True)
def _run_many(E0, U0, uni, out):
    empty_path = np.zeros((0, E0.size + 3), dtype=np.int64)
    for i in range(uni.shape[0]):
        out[i] = _run_kernel(E0, U0, uni[i], 1, empty_path)


def draws_needed(seq: DegreeSequence) -> int:
    """Upper bound on uniforms consumed by one run (one per step and per stub)."""
    return seq.N + seq.half_edges + 1


# --------------------------------------------------------------------------
# chain state and single steps

@dataclass(frozen=True)
class ChainState:
    """Microscopic state ``(S, U, E_0..E_D)`` plus the blocked-vertex count."""

    N: int
    step: int
    S: int
    U: int
    E_counts: tuple
    blocked: int

    def __post_init__(self):
        object.__setattr__(self, "E_counts", tuple(int(v) for v in self.E_counts))
        if self.S + self.blocked + sum(self.E_counts) != self.N:
            raise InvalidInput("S + blocked + empties must equal N")
        if self.empty_stubs > self.U:
            raise InvalidInput("empty-vertex stubs exceed unpaired half-edges")

    @classmethod
    def initial(cls, seq: DegreeSequence) -> "ChainState":
        return cls(seq.N, 0, 0, seq.half_edges, tuple(seq.degree_counts()), 0)

    @property
    def max_degree(self) -> int:
        return len(self.E_counts) - 1

    @property
    def n_empty(self) -> int:
        return sum(self.E_counts)

    @property
    def empty_stubs(self) -> int:
        return sum(j * c for j, c in enumerate(self.E_counts))

    @property
    def blocked_stubs(self) -> int:
        return self.U - self.empty_stubs

    def key(self) -> tuple:
        return (self.S, self.U, self.E_counts, self.blocked)

    def to_array(self) -> np.ndarray:
        return np.array([self.S, self.U, *self.E_counts], dtype=np.int64)


@dataclass(frozen=True)
class StepOutcome:
    """Realised step quantities; ``W`` and ``W_tilde`` are indexed by degree 1..D."""

    chosen_degree: int
    H: int
    B: int
    W_tilde: np.ndarray
    W: np.ndarray


def _require_empty(state: ChainState):
    if state.n_empty == 0:
        raise ContractViolation("no empty vertex left: the chain is absorbed")


def step_exact(state: ChainState, rng) -> tuple[ChainState, StepOutcome]:
    """Select a uniform empty vertex and pair its stubs one by one."""
    _require_empty(state)
    rng = make_rng(rng)
    D = state.max_degree
    E = np.array(state.E_counts, dtype=np.int64)
    st = np.array([state.S, state.U, state.blocked, state.blocked_stubs], dtype=np.int64)
    uni = rng.random(D + 1)
    W = np.zeros(D + 1, dtype=np.int64)
    Wt = np.zeros(D + 1, dtype=np.int64)
    _, k, H, B = _step_kernel(E, st, uni, 0, W, Wt)
    new = ChainState(state.N, state.step + 1, int(st[0]), int(st[1]), tuple(E), int(st[2]))
    return new, StepOutcome(int(k), int(H), int(B), Wt[1:].copy(), W[1:].copy())


@lru_cache(maxsize=None)
def loop_count_law(k: int, U: int) -> tuple:
    """Exact law of the number of loops formed when the ``k`` stubs of one vertex
    are paired sequentially with uniform partners among ``U`` unpaired stubs.

    Returns a tuple of Fractions indexed by the number of loops.
    """
    law = [Fraction(0)] * (k // 2 + 1)

    def walk(own, avail, loops, p):
        if own == 0:
            law[loops] += p
            return
        own -= 1
        others = avail - 1
        if own > 0:
            walk(own - 1, avail - 2, loops + 1, p * Fraction(own, others))
        if others - own > 0:
            walk(own, avail - 2, loops, p * Fraction(others - own, others))

    walk(k, U, 0, Fraction(1))
    return tuple(law)


def _distinct_hits_law(stubs_per_vertex: int, n_vertices: int, w: int) -> dict:
    """Law of the number of distinct vertices owning ``w`` stubs drawn without
    replacement from ``n_vertices`` vertices with ``stubs_per_vertex`` stubs each."""
    j, n = stubs_per_vertex, n_vertices
    total = comb(j * n, w)
    law = {}
    for m in range(0, min(n, w) + 1):
        cover = sum((-1) ** i * comb(m, i) * comb(j * (m - i), w) for i in range(m + 1))
        if cover:
            law[m] = Fraction(comb(n, m) * cover, total)
    return law


def step_cascade(state: ChainState, rng) -> tuple[ChainState, StepOutcome]:
    """Same transition as :func:`step_exact`, sampled through the cascade
    (loops, blocked pairings, multivariate hypergeometric per degree,
    distinct vertices hit) without following individual stubs."""
    _require_empty(state)
    rng = make_rng(rng)
    D = state.max_degree
    E = np.array(state.E_counts, dtype=np.int64)
    k = int(rng.choice(D + 1, p=E / E.sum()))
    W = np.zeros(D + 1, dtype=np.int64)
    Wt = np.zeros(D + 1, dtype=np.int64)
    if k == 0:
        E[0] -= 1
        new = ChainState(state.N, state.step + 1, state.S + 1, state.U, tuple(E), state.blocked)
        return new, StepOutcome(0, 0, 0, Wt[1:], W[1:])
    loops_p = np.array([float(p) for p in loop_count_law(k, state.U)])
    loops = int(rng.choice(loops_p.size, p=loops_p / loops_p.sum()))
    H = k - 2 * loops
    n_blocked = state.blocked_stubs
    others = state.U - k
    B = int(rng.hypergeometric(n_blocked, others - n_blocked, H)) if H > 0 else 0
    E[k] -= 1
    colors = np.arange(D + 1) * E
    if H - B > 0:
        W[1:] = rng.multivariate_hypergeometric(colors[1:], H - B)
    for j in range(1, D + 1):
        if W[j]:
            picks = rng.choice(j * E[j], size=W[j], replace=False)
            Wt[j] = np.unique(picks // j).size
    E -= Wt
    new = ChainState(
        state.N, state.step + 1, state.S + 1, state.U - k - H, tuple(E), state.blocked + int(Wt.sum())
    )
    return new, StepOutcome(k, H, B, Wt[1:].copy(), W[1:].copy())


def cascade_step_law(state: ChainState) -> dict:
    """Exact one-step law of the cascade sampler as ``{ChainState.key(): Fraction}``."""
    _require_empty(state)
    D = state.max_degree
    E = list(state.E_counts)
    n_empty = sum(E)
    law: dict = {}

    def add(key, p):
        law[key] = law.get(key, Fraction(0)) + p

    for k in range(D + 1):
        if E[k] == 0:
            continue
        pk = Fraction(E[k], n_empty)
        if k == 0:
            E1 = E.copy()
            E1[0] -= 1
            add((state.S + 1, state.U, tuple(E1), state.blocked), pk)
            continue
        Ek = E.copy()
        Ek[k] -= 1
        sizes = [j * Ek[j] for j in range(D + 1)]
        n_blocked = state.blocked_stubs
        others = state.U - k
        for loops, pl in enumerate(loop_count_law(k, state.U)):
            if pl == 0:
                continue
            H = k - 2 * loops
            for B in range(0, H + 1):
                pb = Fraction(comb(n_blocked, B) * comb(others - n_blocked, H - B), comb(others, H))
                if pb == 0:
                    continue
                for Wvec, pw in _mv_hypergeom(sizes, H - B):
                    branches = [({}, Fraction(1))]
                    for j in range(1, D + 1):
                        if Wvec[j] == 0:
                            continue
                        dl = _distinct_hits_law(j, Ek[j], Wvec[j])
                        branches = [({**b, j: m}, p * q) for b, p in branches for m, q in dl.items()]
                    for hits, ph in branches:
                        E1 = Ek.copy()
                        for j, m in hits.items():
                            E1[j] -= m
                        key = (state.S + 1, state.U - k - H, tuple(E1), state.blocked + sum(hits.values()))
                        add(key, pk * pl * pb * pw * ph)
    return law


def _mv_hypergeom(sizes, draws):
    """Yield (vector, Fraction) for the multivariate hypergeometric law."""
    total = comb(sum(sizes), draws)
    n = len(sizes)

    def rec(i, left, acc, ways):
        if i == n:
            if left == 0:
                yield list(acc), Fraction(ways, total)
            return
        for w in range(0, min(left, sizes[i]) + 1):
            acc.append(w)
            yield from rec(i + 1, left - w, acc, ways * comb(sizes[i], w))
            acc.pop()

    yield from rec(0, draws, [], 1)


# --------------------------------------------------------------------------
# full runs

@dataclass(frozen=True)
class RunResult:
    """One absorbed run. ``path`` rows are ``[n, S, U, E_0..E_D]`` (integer counts)."""

    N: int
    path: np.ndarray
    T_star_steps: int
    seed: object = None
    thin: int = 1

    @property
    def independent_set_fraction(self) -> float:
        return self.T_star_steps / self.N

    def rescaled(self) -> np.ndarray:
        """Columns ``t, s, u, e_0..e_D`` of ``X_n / N`` at ``t = n / N``."""
        return self.path.astype(float) / self.N

    def to_csv(self, path, metadata: str | None = None) -> None:
        write_path_csv(path, self.rescaled(), metadata)

    def to_json(self, path, metadata: dict | None = None) -> None:
        payload = {
            "N": self.N,
            "T_star_steps": self.T_star_steps,
            "independent_set_fraction": self.independent_set_fraction,
            "seed": _jsonable(self.seed),
            "thin": self.thin,
            "columns": path_columns(self.path.shape[1] - 4),
            "path": self.rescaled().tolist(),
        }
        if metadata:
            payload["metadata"] = metadata
        Path(path).write_text(json.dumps(payload, indent=1))


def _jsonable(seed):
    if isinstance(seed, (int, str)) or seed is None:
        return seed
    return repr(seed)


def path_columns(D: int) -> list:
    return ["t", "s", "u"] + [f"e_{j}" for j in range(D + 1)]


def write_path_csv(path, table: np.ndarray, metadata: str | None = None) -> None:
    """Shared path schema ``t, s, u, e_0..e_D`` for simulated and ODE paths."""
    table = np.asarray(table, dtype=float)
    with open(path, "w", newline="") as fh:
        if metadata:
            fh.write(f"# {metadata}\n")
        w = csv.writer(fh)
        w.writerow(path_columns(table.shape[1] - 4))
        for row in table:
            w.writerow([repr(float(v)) for v in row])


def read_path_csv(path) -> np.ndarray:
    with open(path) as fh:
        rows = [line for line in fh if not line.startswith("#")]
    return np.loadtxt(rows[1:], delimiter=",", ndmin=2)


def run_to_absorption(seq: DegreeSequence, rng=None, thin: int = 1) -> RunResult:
    """Run the exploration until no empty vertex remains.

    Stubs left on blocked vertices at absorption are not paired: the final
    completion of the graph does not change the chain or ``T_N*``.
    """
    if thin < 1:
        raise InvalidInput("thin must be >= 1")
    seed = rng
    gen = make_rng(rng)
    E0 = seq.degree_counts()
    uni = gen.random(draws_needed(seq))
    rows = seq.N // thin + 2
    path = np.zeros((rows, E0.size + 3), dtype=np.int64)
    T = _run_kernel(E0, seq.half_edges, uni, thin, path)
    used = int(np.count_nonzero(path[:, 0] > 0)) + 1
    return RunResult(seq.N, path[:used].copy(), int(T), seed, thin)


def run_steps(seq: DegreeSequence, rng=None, sampler=step_exact):
    """Python-level run yielding ``(state, outcome)`` pairs; slow, for inspection."""
    rng = make_rng(rng)
    state = ChainState.initial(seq)
    while state.n_empty:
        state, outcome = sampler(state, rng)
        yield state, outcome


# --------------------------------------------------------------------------
# limiting increment

def sample_Z(x, rng=None, size=None) -> np.ndarray:
    """Sample the limiting one-step increment at macroscopic state ``x``.

    Returns shape ``(D+3,)`` for ``size=None`` else ``(size, D+3)``.
    """
    x = as_array(x)
    e = x[2:]
    u = x[1]
    D = e.size - 1
    esum = e.sum()
    if not esum > 0:
        raise ContractViolation("sample_Z needs sum(e) > 0")
    rng = make_rng(rng)
    n = 1 if size is None else int(size)
    k_all = np.arange(D + 1)
    je = k_all * e
    jsum = je.sum()
    K = rng.choice(D + 1, size=n, p=e / esum)
    if jsum > 0:
        p_block = min(max(1.0 - jsum / u, 0.0), 1.0)
        Bn = rng.binomial(K, p_block)
        M = rng.multinomial(K - Bn, je / jsum)
    else:
        M = np.zeros((n, D + 1), dtype=np.int64)
    Z = np.zeros((n, D + 3))
    Z[:, 0] = 1.0
    Z[:, 1] = -2.0 * K
    Z[:, 2:] = -M
    Z[np.arange(n), 2 + K] -= 1.0
    return Z[0] if size is None else Z
