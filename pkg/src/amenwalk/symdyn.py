"""Finite-alphabet symbolic base dynamics.

A :class:`MarkovBase` is a one-sided subshift of finite type together with a
Bernoulli or stationary 1-step Markov measure.  Probabilities are held either
as :class:`fractions.Fraction` (exact mode, the default) or as floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

STATIONARITY_TOL = 1e-12


class BaseError(ValueError):
    """Raised for malformed bases and inadmissible words."""


def to_prob(value, exact: bool = True):
    """Parse a probability from a decimal string, int, Fraction or float."""
    if exact:
        if isinstance(value, float):
            # floats are taken at their shortest repr, not their binary value
            return Fraction(repr(value))
        return Fraction(value)
    return float(Fraction(value)) if isinstance(value, str) else float(value)


@dataclass(frozen=True)
class MarkovBase:
    alphabet: tuple[str, ...]
    admissibility: tuple[tuple[bool, ...], ...]
    kind: str  # "bernoulli" | "markov"
    pi: tuple  # Bernoulli weights or stationary vector
    P: tuple | None = None  # row-stochastic transitions (markov only)
    exact: bool = True
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(self.alphabet)})
        A = len(self.alphabet)
        if A < 2:
            raise BaseError("alphabet needs at least 2 symbols")
        if len(self._index) != A:
            raise BaseError("alphabet has duplicate symbols")
        if len(self.admissibility) != A or any(len(r) != A for r in self.admissibility):
            raise BaseError("admissibility must be an AxA matrix")
        if len(self.pi) != A:
            raise BaseError("probability vector length does not match alphabet")
        if self.kind == "bernoulli":
            if any(p <= 0 for p in self.pi):
                raise BaseError("Bernoulli weights must be positive")
            _check_sum(self.pi, self.exact, "weights")
            if not self.full_branch:
                # a Bernoulli measure charges every word, so the shift must be full
                raise BaseError("Bernoulli measure requires the full shift")
        elif self.kind == "markov":
            if self.P is None or len(self.P) != A or any(len(r) != A for r in self.P):
                raise BaseError("Markov measure needs an AxA matrix P")
            if any(p <= 0 for p in self.pi):
                raise BaseError("stationary vector must be positive")
            _check_sum(self.pi, self.exact, "pi")
            for i, row in enumerate(self.P):
                _check_sum(row, self.exact, f"P row {i}")
                for j, q in enumerate(row):
                    if q < 0:
                        raise BaseError(f"P[{i}][{j}] is negative")
                    if (q > 0) != bool(self.admissibility[i][j]):
                        raise BaseError(
                            f"P[{i}][{j}] positivity disagrees with admissibility")
            for j in range(A):
                s = _sum((self.pi[i] * self.P[i][j] for i in range(A)), self.exact)
                if self.exact:
                    ok = s == self.pi[j]
                else:
                    ok = abs(s - self.pi[j]) <= STATIONARITY_TOL
                if not ok:
                    raise BaseError(f"pi is not stationary at column {j}: (pi P)_j = {s}")
        else:
            raise BaseError(f"unknown measure kind {self.kind!r}")

    # construction helpers -------------------------------------------------

    @classmethod
    def bernoulli(cls, alphabet: Sequence[str], weights: Sequence, exact: bool = True):
        alphabet = tuple(alphabet)
        A = len(alphabet)
        full = tuple(tuple(True for _ in range(A)) for _ in range(A))
        return cls(alphabet, full, "bernoulli", tuple(to_prob(w, exact) for w in weights),
                   None, exact)

    @classmethod
    def uniform(cls, alphabet: Sequence[str], exact: bool = True):
        A = len(alphabet)
        return cls.bernoulli(alphabet, [Fraction(1, A)] * A, exact)

    @classmethod
    def markov(cls, alphabet: Sequence[str], pi: Sequence, P: Sequence[Sequence],
               admissibility: Sequence[Sequence[bool]] | None = None, exact: bool = True):
        alphabet = tuple(alphabet)
        P = tuple(tuple(to_prob(q, exact) for q in row) for row in P)
        if admissibility is None:
            admissibility = tuple(tuple(q > 0 for q in row) for row in P)
        adm = tuple(tuple(bool(x) for x in row) for row in admissibility)
        return cls(alphabet, adm, "markov", tuple(to_prob(p, exact) for p in pi), P, exact)

    # basic queries --------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.alphabet)

    @property
    def full_branch(self) -> bool:
        return all(all(r) for r in self.admissibility)

    @property
    def one(self):
        return Fraction(1) if self.exact else 1.0

    @property
    def zero(self):
        return Fraction(0) if self.exact else 0.0

    def index(self, symbol) -> int:
        try:
            return self._index[symbol]
        except (KeyError, TypeError):
            raise BaseError(f"unknown symbol {symbol!r}") from None

    def indices(self, word: Iterable) -> list[int]:
        return [self.index(s) for s in word]

    def symbol_weight(self, symbol):
        """Mass of the length-1 cylinder [symbol] (p_a or pi_a)."""
        return self.pi[self.index(symbol)]

    def transition(self, a: int, b: int):
        """Conditional probability of b following a (by index)."""
        if self.kind == "bernoulli":
            return self.pi[b]
        return self.P[a][b]

    def with_mode(self, exact: bool) -> "MarkovBase":
        if exact == self.exact:
            return self
        conv = (lambda x: Fraction(x)) if exact else float
        P = None if self.P is None else tuple(tuple(conv(q) for q in r) for r in self.P)
        return MarkovBase(self.alphabet, self.admissibility, self.kind,
                          tuple(conv(p) for p in self.pi), P, exact)

    def words(self, n: int) -> list[tuple[str, ...]]:
        """All admissible words of length n in lexicographic (alphabet) order."""
        out: list[tuple[int, ...]] = [()]
        for _ in range(n):
            out = [w + (b,) for w in out for b in range(self.size)
                   if not w or self.admissibility[w[-1]][b]]
        return [tuple(self.alphabet[i] for i in w) for w in out]

    def adjacency(self) -> np.ndarray:
        return np.array(self.admissibility, dtype=bool)


def _sum(xs, exact):
    xs = list(xs)
    return sum(xs, Fraction(0)) if exact else math.fsum(xs)


def _check_sum(xs, exact, what):
    s = _sum(xs, exact)
    ok = s == 1 if exact else abs(s - 1.0) <= STATIONARITY_TOL
    if not ok:
        shown = _decimal(s) if exact else f"{s:.15g}"
        raise BaseError(f"{what} sum {shown} ≠ 1")


def _decimal(x: Fraction) -> str:
    # finite decimals print as decimals, everything else as p/q
    d = x.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    return f"{float(x):.15g}"


# operations -----------------------------------------------------------------

def is_admissible(base: MarkovBase, w: Sequence) -> bool:
    idx = base.indices(w)
    return all(base.admissibility[a][b] for a, b in zip(idx, idx[1:]))


def check_word(base: MarkovBase, w: Sequence) -> tuple:
    """Validate and return ``w`` as a tuple; raises on inadmissible input."""
    w = tuple(w)
    if not is_admissible(base, w):
        raise BaseError(f"word {''.join(map(str, w))!r} is not admissible")
    return w


def cylinder_measure(base: MarkovBase, w: Sequence, strict: bool = True):
    """mu([w]); the empty word has measure one."""
    idx = base.indices(w)
    if not all(base.admissibility[a][b] for a, b in zip(idx, idx[1:])):
        if strict:
            raise BaseError(f"word {w!r} is not admissible")
        return base.zero
    if not idx:
        return base.one
    m = base.pi[idx[0]]
    for a, b in zip(idx, idx[1:]):
        m = m * base.transition(a, b)
    return m


def inverse_branch_weight(base: MarkovBase, w: Sequence, nxt):
    """phi_w on the cylinder [nxt]: the Radon-Nikodym derivative of mu o tau_w."""
    w = tuple(w)
    if not w:
        return base.one
    j = base.index(nxt)
    if not is_admissible(base, w + (nxt,)):
        raise BaseError(f"word {w + (nxt,)!r} is not admissible")
    m = cylinder_measure(base, w)
    if base.kind == "bernoulli":
        return m
    return m * base.P[base.index(w[-1])][j] / base.pi[j]


def d_r_distance(x: Sequence, y: Sequence, r) -> float:
    """r ** (first index where x and y differ); r ** L bound when prefixes agree."""
    if not 0 < r < 1:
        raise BaseError(f"r must lie in (0, 1), got {r}")
    if not x or not y:
        raise BaseError("sequences must be nonempty")
    L = min(len(x), len(y))
    for i in range(L):
        if x[i] != y[i]:
            return r ** i
    return r ** L


@dataclass(frozen=True)
class Mixing:
    transitive: bool
    mixing: bool
    period: int


def check_transitive_mixing(base_or_matrix) -> Mixing:
    """Irreducibility, primitivity and period of the admissibility matrix."""
    if isinstance(base_or_matrix, MarkovBase):
        M = base_or_matrix.adjacency()
    else:
        M = np.asarray(base_or_matrix, dtype=bool)
    n = M.shape[0]
    reach = _closure(M)
    transitive = bool(reach.all())
    if not transitive:
        return Mixing(False, False, 0)
    # period = gcd of (level(u) + 1 - level(v)) over edges u->v, BFS levels from 0
    level = [-1] * n
    level[0] = 0
    queue = [0]
    for u in queue:
        for v in np.flatnonzero(M[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(int(v))
    g = 0
    for u in range(n):
        for v in np.flatnonzero(M[u]):
            g = math.gcd(g, abs(level[u] + 1 - level[v]))
    return Mixing(True, g == 1, g)


def _closure(M: np.ndarray) -> np.ndarray:
    """reach[i, j] true iff j is reachable from i by a path of length >= 1."""
    R = M.copy()
    n = M.shape[0]
    for k in range(n):
        R = R | (R[:, [k]] & R[[k], :])
    return R


def word_str(w: Sequence) -> str:
    return "".join(map(str, w)) if all(len(str(s)) == 1 for s in w) else " ".join(map(str, w))


def lcm_denominator(values: Iterable[Fraction]) -> int:
    return reduce(math.lcm, (Fraction(v).denominator for v in values), 1)
