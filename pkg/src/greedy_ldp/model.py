"""Degree distributions, degree sequences and macroscopic state vectors.

A macroscopic state is ``x = (s, u, e_0, ..., e_D)``: the fraction of vertices
already in the independent set, the (rescaled) number of unpaired half-edges
and the fraction of empty vertices of each degree.  States live in the compact
set ``E = {sum_j j e_j <= u <= lam}``.  Covectors ``alpha`` and velocities
``beta`` share the same layout and are stored as flat float arrays of length
``D + 3``; :class:`MacroState`, :class:`Covector` and :class:`Velocity` are thin
immutable wrappers that convert to and from that layout.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput

DEGREE_CAP = 64
PROB_TOL = 1e-12
STATE_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DegreeDistribution:
    """Limiting degree law ``(p_0, ..., p_D)``."""

    probs: np.ndarray
    degree_cap: int = DEGREE_CAP

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise InvalidInput("probs must be a non-empty 1-d vector")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidInput("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise InvalidInput(f"probabilities sum to {p.sum()!r}, not 1")
        if p.size - 1 > self.degree_cap:
            raise InvalidInput(f"max degree {p.size - 1} exceeds cap {self.degree_cap}")
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def max_degree(self) -> int:
        return self.probs.size - 1

    @property
    def mean_degree(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    @classmethod
    def regular(cls, d: int, degree_cap: int = DEGREE_CAP) -> "DegreeDistribution":
        if d < 0 or d > degree_cap:
            raise InvalidInput(f"degree {d} outside [0, {degree_cap}]")
        p = np.zeros(d + 1)
        p[d] = 1.0
        return cls(p, degree_cap)

    @property
    def regular_degree(self) -> int | None:
        """``d`` if this is the point mass at ``d``, else None."""
        nz = np.flatnonzero(self.probs)
        if nz.size == 1 and self.probs[nz[0]] == 1.0:
            return int(nz[0])
        return None


@dataclass(frozen=True)
class DegreeSequence:
    """Degrees of the ``N`` labelled vertices of a configuration model."""

    degrees: np.ndarray
    degree_cap: int = DEGREE_CAP

    def __post_init__(self):
        deg = np.asarray(self.degrees)
        if deg.ndim != 1 or deg.size == 0:
            raise InvalidInput("degree sequence must be a non-empty 1-d vector")
        if not np.issubdtype(deg.dtype, np.integer):
            if not np.all(deg == np.round(deg)):
                raise InvalidInput("degrees must be integers")
        deg = deg.astype(np.int64)
        if deg.min() < 0 or deg.max() > self.degree_cap:
            raise InvalidInput(f"degrees must lie in [0, {self.degree_cap}]")
        if int(deg.sum()) % 2:
            raise InvalidInput(f"odd total half-edge count {int(deg.sum())}")
        deg.setflags(write=False)
        object.__setattr__(self, "degrees", deg)

    @property
    def N(self) -> int:
        return int(self.degrees.size)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    @property
    def half_edges(self) -> int:
        return int(self.degrees.sum())

    def degree_counts(self, max_degree: int | None = None) -> np.ndarray:
        D = self.max_degree if max_degree is None else max_degree
        return np.bincount(self.degrees, minlength=D + 1).astype(np.int64)

    def distribution(self) -> DegreeDistribution:
        return DegreeDistribution(self.degree_counts() / self.N, self.degree_cap)

    @classmethod
    def from_distribution(cls, dist: DegreeDistribution, N: int) -> "DegreeSequence":
        """Deterministic sequence whose degree counts round ``N * p`` (largest remainder).

        If the rounded total half-edge count is odd, one vertex of the largest
        odd degree with positive probability is moved to a neighbouring degree
        present in the law.
        """
        raw = dist.probs * N
        counts = np.floor(raw).astype(np.int64)
        short = N - counts.sum()
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
        if int(np.dot(np.arange(counts.size), counts)) % 2:
            support = np.flatnonzero(dist.probs)
            odd = [j for j in support[::-1] if j % 2 and counts[j] > 0]
            even_nb = [j for j in support if j % 2 == 0]
            if not odd or not even_nb:
                raise InvalidInput("cannot realise an even half-edge total at this N")
            j = odd[0]
            counts[j] -= 1
            counts[min(even_nb, key=lambda k: abs(k - j))] += 1
        degrees = np.repeat(np.arange(counts.size), counts)
        return cls(degrees, dist.degree_cap)


@dataclass(frozen=True)
class MacroState:
    s: float
    u: float
    e: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "e", _frozen(self.e))

    def to_array(self) -> np.ndarray:
        return np.concatenate(([self.s, self.u], self.e))

    @classmethod
    def from_array(cls, x) -> "MacroState":
        x = np.asarray(x, dtype=float)
        return cls(x[0], x[1], x[2:])

    @property
    def max_degree(self) -> int:
        return self.e.size - 1


@dataclass(frozen=True)
class Covector:
    alpha_s: float
    alpha_u: float
    alpha_e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha_s", float(self.alpha_s))
        object.__setattr__(self, "alpha_u", float(self.alpha_u))
        object.__setattr__(self, "alpha_e", _frozen(self.alpha_e))
        if not np.all(np.isfinite(self.to_array())):
            raise InvalidInput("covector entries must be finite")

    def to_array(self) -> np.ndarray:
        return np.concatenate(([self.alpha_s, self.alpha_u], self.alpha_e))

    @classmethod
    def from_array(cls, a) -> "Covector":
        a = np.asarray(a, dtype=float)
        return cls(a[0], a[1], a[2:])

    @classmethod
    def zeros(cls, D: int) -> "Covector":
        return cls(0.0, 0.0, np.zeros(D + 1))


@dataclass(frozen=True)
class Velocity:
    beta_s: float
    beta_u: float
    beta_e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta_s", float(self.beta_s))
        object.__setattr__(self, "beta_u", float(self.beta_u))
        object.__setattr__(self, "beta_e", _frozen(self.beta_e))
        if not np.all(np.isfinite(self.to_array())):
            raise InvalidInput("velocity entries must be finite")

    def to_array(self) -> np.ndarray:
        return np.concatenate(([self.beta_s, self.beta_u], self.beta_e))

    @classmethod
    def from_array(cls, b) -> "Velocity":
        b = np.asarray(b, dtype=float)
        return cls(b[0], b[1], b[2:])


def as_array(v) -> np.ndarray:
    """Flat float array for a MacroState/Covector/Velocity or array-like."""
    if hasattr(v, "to_array"):
        return v.to_array()
    return np.asarray(v, dtype=float)


def make_regular(d: int, N: int, degree_cap: int = DEGREE_CAP) -> DegreeSequence:
    if not 2 <= d <= degree_cap:
        raise InvalidInput(f"regular degree must lie in [2, {degree_cap}], got {d}")
    if N < 1:
        raise InvalidInput("N must be positive")
    if (N * d) % 2:
        raise InvalidInput(f"N*d = {N * d} half-edges is odd")
    return DegreeSequence(np.full(N, d, dtype=np.int64), degree_cap)


def initial_macrostate(dist: DegreeDistribution) -> MacroState:
    return MacroState(0.0, dist.mean_degree, dist.probs)


def validate_in_E(x, lam: float, tol: float = STATE_TOL) -> bool:
    """Membership of ``x`` in ``E = {sum_j j e_j <= u <= lam}`` up to ``tol``."""
    x = as_array(x)
    if x.size < 3 or not np.all(np.isfinite(x)):
        return False
    s, u, e = x[0], x[1], x[2:]
    if s < -tol or s > 1 + tol:
        return False
    if np.any(e < -tol) or np.any(e > 1 + tol):
        return False
    if u > lam + tol:
        return False
    return bool(np.dot(np.arange(e.size), e) <= u + tol)


_KV = re.compile(r"^\s*(\d+)\s*[=:]\s*([^#]+?)\s*(?:#.*)?$")


def read_distribution_file(path, degree_cap: int = DEGREE_CAP) -> DegreeDistribution:
    """Parse ``j = p_j`` lines; blank lines and ``#`` comments are ignored.

    Fractions such as ``1/3`` are accepted. Missing degrees get probability 0.
    """
    from fractions import Fraction

    entries: dict[int, float] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _KV.match(line)
        if not m:
            raise InvalidInput(f"{path}:{lineno}: expected 'j = p_j', got {line!r}")
        j = int(m.group(1))
        if j in entries:
            raise InvalidInput(f"{path}:{lineno}: degree {j} given twice")
        entries[j] = float(Fraction(m.group(2).strip()))
    if not entries:
        raise InvalidInput(f"{path}: no degree entries")
    p = np.zeros(max(entries) + 1)
    for j, pj in entries.items():
        p[j] = pj
    return DegreeDistribution(p, degree_cap)


def write_distribution_file(dist: DegreeDistribution, path) -> None:
    lines = [f"{j} = {float(pj)!r}" for j, pj in enumerate(dist.probs) if pj > 0]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_probs(text: str, degree_cap: int = DEGREE_CAP) -> DegreeDistribution:
    """Parse a comma separated ``p0,p1,...`` list (fractions allowed)."""
    from fractions import Fraction

    try:
        p = [float(Fraction(tok.strip())) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise InvalidInput(f"bad probability list {text!r}") from exc
    return DegreeDistribution(np.array(p), degree_cap)
