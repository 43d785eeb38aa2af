"""Replica ensembles of the exploration and exact laws for tiny instances.

Random streams: replicas are grouped in fixed-size chunks (the size depends
only on the degree sequence) and chunk ``c`` draws from
``Philox(SeedSequence(seed, spawn_key=(c,)))``.  Chunks are independent, so
results do not depend on how many worker threads execute them.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.stats import norm

from .dynamics import ChainState, _run_many, draws_needed
from .errors import InvalidInput
from .model import DegreeSequence

THREADS_ENV = "GREEDY_LDP_THREADS"
CHUNK_DRAWS = 1 << 22
MAX_CHUNK = 4096
EXACT_HALF_EDGE_LIMIT = 12


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def chunk_size(seq: DegreeSequence) -> int:
    return int(max(1, min(MAX_CHUNK, CHUNK_DRAWS // draws_needed(seq))))


def _chunk_generator(seed, c: int) -> np.random.Generator:
    entropy = None if seed is None else seed
    ss = np.random.SeedSequence(entropy, spawn_key=(c,))
    return np.random.Generator(np.random.Philox(ss))


def simulate_stopping_times(seq: DegreeSequence, replicas: int, seed=0, threads: int | None = None) -> np.ndarray:
    """``T_N*`` for ``replicas`` independent runs, ordered by replica index."""
    if replicas < 1:
        raise InvalidInput("replicas must be >= 1")
    if seed is None:
        seed = int(np.random.SeedSequence().entropy)
    E0 = seq.degree_counts()
    U0 = seq.half_edges
    need = draws_needed(seq)
    size = chunk_size(seq)
    n_chunks = -(-replicas // size)
    out = np.zeros(replicas, dtype=np.int64)

    def work(c):
        lo = c * size
        hi = min(replicas, lo + size)
        uni = _chunk_generator(seed, c).random((size, need))
        _run_many(E0, U0, uni[: hi - lo], out[lo:hi])

    threads = threads or default_threads()
    if threads == 1 or n_chunks == 1:
        for c in range(n_chunks):
            work(c)
    else:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, range(n_chunks)))
    return out


@dataclass(frozen=True)
class TailEstimate:
    threshold: float
    side: str
    hits: int
    replicas: int
    p_hat: float
    ci_low: float
    ci_high: float
    flagged: bool = False

    @property
    def log_p(self) -> float:
        return float(np.log(self.p_hat)) if self.p_hat > 0 else -np.inf


def wilson_interval(hits: int, n: int, level: float = 0.95) -> tuple:
    if n <= 0:
        raise InvalidInput("n must be positive")
    z = norm.ppf(0.5 + level / 2)
    p = hits / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # guard against rounding at the extremes
    return min(lo, p), max(hi, p)


def tail_from_fractions(fractions: np.ndarray, threshold: float, side: str = "upper") -> TailEstimate:
    if side not in ("upper", "lower"):
        raise InvalidInput(f"side must be 'upper' or 'lower', got {side!r}")
    n = fractions.size
    tol = 1e-12
    hits = int(np.count_nonzero(fractions >= threshold - tol) if side == "upper"
               else np.count_nonzero(fractions <= threshold + tol))
    lo, hi = wilson_interval(hits, n)
    return TailEstimate(threshold, side, hits, n, hits / n, lo, hi, flagged=hits == 0)


@dataclass
class EnsembleResult:
    N: int
    replicas: int
    seed: object
    fractions: np.ndarray
    chunk_size: int
    tail_estimates: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(self.fractions.mean())

    @property
    def variance(self) -> float:
        return float(self.fractions.var(ddof=1)) if self.replicas > 1 else 0.0

    @property
    def stderr(self) -> float:
        return float(np.sqrt(self.variance / self.replicas))

    def histogram(self) -> dict:
        """Empirical law of ``T_N*/N`` as ``{fraction: probability}``."""
        steps, counts = np.unique(np.rint(self.fractions * self.N).astype(np.int64), return_counts=True)
        return {int(s) / self.N: c / self.replicas for s, c in zip(steps, counts)}

    def summary(self) -> dict:
        return {
            "N": self.N,
            "replicas": self.replicas,
            "seed": self.seed,
            "chunk_size": self.chunk_size,
            "mean": self.mean,
            "variance": self.variance,
            "stderr": self.stderr,
            "tail_estimates": {
                f"{t.side}:{t.threshold!r}": {
                    "hits": t.hits, "p_hat": t.p_hat, "ci": [t.ci_low, t.ci_high], "flagged": t.flagged,
                }
                for t in self.tail_estimates.values()
            },
        }


def ensemble(seq: DegreeSequence, replicas: int, seed=0, threads: int | None = None,
             thresholds=(), side: str = "upper") -> EnsembleResult:
    T = simulate_stopping_times(seq, replicas, seed, threads)
    res = EnsembleResult(seq.N, replicas, seed, T / seq.N, chunk_size(seq))
    for thr in thresholds:
        res.tail_estimates[(side, float(thr))] = tail_from_fractions(res.fractions, thr, side)
    return res


def tail_probability(seq: DegreeSequence, threshold: float, side: str = "upper", replicas: int = 10_000,
                     seed=0, threads: int | None = None, expected_p: float | None = None) -> TailEstimate:
    """Empirical ``P(T_N*/N >= threshold)`` (or ``<=``) with a Wilson interval."""
    if expected_p is not None and expected_p * replicas < 10:
        warnings.warn(f"expected hits {expected_p * replicas:.2g} < 10; estimate will be noisy", stacklevel=2)
    fractions = simulate_stopping_times(seq, replicas, seed, threads) / seq.N
    return tail_from_fractions(fractions, threshold, side)


# --------------------------------------------------------------------------
# exact oracles on the literal half-edge urn

def _literal_config(state: ChainState):
    """Explicit vertices/stubs realising a count state.

    Returns (status, owner, unpaired) where status[v] in {'E','B','S'}, owner
    maps stub id -> vertex.  All blocked stubs hang on one placeholder vertex;
    which blocked vertex owns a stub never changes any count.
    """
    status, owner, unpaired = [], [], []
    v = 0
    for j, c in enumerate(state.E_counts):
        for _ in range(c):
            status.append("E")
            for _ in range(j):
                owner.append(v)
                unpaired.append(len(owner) - 1)
            v += 1
    status.append("B")
    for _ in range(state.blocked_stubs):
        owner.append(v)
        unpaired.append(len(owner) - 1)
    return status, owner, frozenset(unpaired)


def _literal_step(status, owner, unpaired, degree):
    """Yield (prob, status, unpaired) over every outcome of one step."""
    empties = [v for v, st in enumerate(status) if st == "E"]
    pv = Fraction(1, len(empties))
    for v in empties:
        stubs = sorted(h for h in unpaired if owner[h] == v)

        def pair(i, st, free, p):
            if i == len(stubs):
                yield p, st, free
                return
            h = stubs[i]
            if h not in free:
                yield from pair(i + 1, st, free, p)
                return
            others = sorted(free - {h})
            q = Fraction(1, len(others))
            for g in others:
                st2 = st
                w = owner[g]
                if w != v and st[w] == "E":
                    st2 = st[:w] + ("B",) + st[w + 1:]
                yield from pair(i + 1, st2, free - {h, g}, p * q)

        st0 = tuple(status[:v]) + ("S",) + tuple(status[v + 1:])
        yield from pair(0, st0, unpaired, pv)


def literal_step_law(state: ChainState) -> dict:
    """Exact one-step law by enumerating every vertex choice and stub pairing."""
    if state.n_empty == 0:
        raise InvalidInput("absorbed state has no transition")
    status, owner, unpaired = _literal_config(state)
    deg_of = {}
    for h, v in enumerate(owner):
        deg_of[v] = deg_of.get(v, 0) + 1
    law: dict = {}
    for p, st, free in _literal_step(tuple(status), owner, unpaired, deg_of):
        E = [0] * len(state.E_counts)
        for v, s in enumerate(st):
            if s == "E":
                E[deg_of.get(v, 0)] += 1
        blocked = state.blocked + sum(
            1 for v, s in enumerate(st) if s == "B" and status[v] == "E"
        )
        key = (state.S + 1, len(free), tuple(E), blocked)
        law[key] = law.get(key, Fraction(0)) + p
    return law


def exact_distribution_tiny(seq: DegreeSequence) -> dict:
    """Exact law ``{T_N*: Fraction}`` by enumerating every uniform choice."""
    if seq.half_edges > EXACT_HALF_EDGE_LIMIT:
        raise InvalidInput(
            f"{seq.half_edges} half-edges exceeds the enumeration bound {EXACT_HALF_EDGE_LIMIT}"
        )
    owner = tuple(v for v, d in enumerate(seq.degrees) for _ in range(int(d)))

    @lru_cache(maxsize=None)
    def law_from(status, unpaired):
        if "E" not in status:
            return {0: Fraction(1)}
        out: dict = {}
        for p, st, free in _literal_step(status, owner, unpaired, None):
            for t, q in law_from(st, free).items():
                out[t + 1] = out.get(t + 1, Fraction(0)) + p * q
        return out

    return dict(sorted(law_from(("E",) * seq.N, frozenset(range(len(owner)))).items()))


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(float(p.get(k, 0)) - float(q.get(k, 0))) for k in keys)
