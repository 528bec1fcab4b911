"""Nearest-neighbour cocycles, graph extensions and their structural checks.

A cocycle assigns to every base symbol a bijection of the (lazily discovered)
vertex set.  Besides the per-vertex ``act``/``act_inverse`` API, every cocycle
encodes vertices as integers so the dynamic programs in :mod:`amenwalk.walkdp`
can push whole arrays of vertices through a symbol at once.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

import numpy as np

from .symdyn import BaseError, MarkovBase, check_word, is_admissible
from .wgraph import WeightedDigraph

INT64_SAFE = 1 << 62


class CocycleError(ValueError):
    pass


class Cocycle:
    """Base class.  Subclasses define ``act``/``act_inverse`` on vertex keys.

    ``symbols`` fixes the symbol order; it must equal the base alphabet.  The
    default integer coding interns vertices in a table, which is correct for
    any cocycle but loops in Python.  Subclasses with arithmetic codings
    override ``encode``/``decode``/``act_codes``/``act_inverse_codes``.
    """

    kind = "generic"

    def __init__(self, symbols: Sequence[str], origin: Hashable):
        self.symbols = tuple(symbols)
        self.origin = origin
        self._sym = {s: i for i, s in enumerate(self.symbols)}
        self._table: dict[Hashable, int] = {}
        self._keys: list[Hashable] = []

    def sym_index(self, symbol) -> int:
        try:
            return self._sym[symbol]
        except KeyError:
            raise CocycleError(f"cocycle has no action for symbol {symbol!r}") from None

    def act(self, symbol, v):
        raise NotImplementedError

    def act_inverse(self, symbol, v):
        raise NotImplementedError

    def act_word(self, word: Iterable, v):
        for s in word:
            v = self.act(s, v)
        return v

    def act_word_inverse(self, word: Sequence, v):
        for s in reversed(tuple(word)):
            v = self.act_inverse(s, v)
        return v

    def action_key(self, word: Sequence) -> Hashable:
        """Canonical key of the composed action of ``word`` (equal keys, equal maps)."""
        return tuple(word)

    # integer coding ------------------------------------------------------------

    #: steps from the origin for which codes are guaranteed to fit in int64
    max_code_steps: int = 10**9

    def encode(self, v) -> int:
        i = self._table.get(v)
        if i is None:
            i = len(self._keys)
            self._table[v] = i
            self._keys.append(v)
        return i

    def decode(self, code: int):
        return self._keys[int(code)]

    def code_depth(self, v) -> int:
        """Steps already used up by ``v`` against ``max_code_steps``."""
        return 0

    def act_codes(self, s: int, codes: np.ndarray) -> np.ndarray:
        sym = self.symbols[s]
        return np.fromiter((self.encode(self.act(sym, self.decode(c))) for c in codes),
                           dtype=np.int64, count=len(codes))

    def act_inverse_codes(self, s: int, codes: np.ndarray) -> np.ndarray:
        sym = self.symbols[s]
        return np.fromiter((self.encode(self.act_inverse(sym, self.decode(c))) for c in codes),
                           dtype=np.int64, count=len(codes))


class FunctionCocycle(Cocycle):
    """Cocycle from plain callables ``actions[s](v)`` / ``inverses[s](v)``."""

    def __init__(self, symbols, origin, actions: dict, inverses: dict):
        super().__init__(symbols, origin)
        self._f = dict(actions)
        self._g = dict(inverses)

    def act(self, symbol, v):
        return self._f[symbol](v)

    def act_inverse(self, symbol, v):
        return self._g[symbol](v)


class LatticeCocycle(Cocycle):
    """Translations of Z^dim: symbol ``s`` adds ``steps[s]``.  Vertices are int tuples."""

    kind = "lattice"

    def __init__(self, symbols, steps: dict | Sequence, dim: int | None = None):
        symbols = tuple(symbols)
        if not isinstance(steps, dict):
            steps = dict(zip(symbols, steps))
        vecs = {s: tuple(int(x) for x in steps[s]) for s in symbols}
        dim = dim if dim is not None else len(next(iter(vecs.values())))
        if any(len(v) != dim for v in vecs.values()):
            raise CocycleError("lattice steps must all have length dim")
        super().__init__(symbols, tuple([0] * dim))
        self.dim = dim
        self.steps = vecs
        self._width = 56 // dim
        self._off = 1 << (self._width - 1)
        span = max([1] + [max(abs(x) for x in v) for v in vecs.values()])
        self.max_code_steps = (self._off - 1) // span
        self._delta = [self._pack_delta(vecs[s]) for s in symbols]

    def _pack_delta(self, vec):
        return sum(int(x) << (self._width * i) for i, x in enumerate(vec))

    def act(self, symbol, v):
        return tuple(a + b for a, b in zip(v, self.steps[symbol]))

    def act_inverse(self, symbol, v):
        return tuple(a - b for a, b in zip(v, self.steps[symbol]))

    def action_key(self, word):
        tot = [0] * self.dim
        for s in word:
            for i, x in enumerate(self.steps[s]):
                tot[i] += x
        return tuple(tot)

    def encode(self, v) -> int:
        return sum((int(x) + self._off) << (self._width * i) for i, x in enumerate(v))

    def decode(self, code):
        code = int(code)
        mask = (1 << self._width) - 1
        return tuple(((code >> (self._width * i)) & mask) - self._off for i in range(self.dim))

    def code_depth(self, v) -> int:
        span = max([1] + [max(abs(x) for x in w) for w in self.steps.values()])
        return -(-max(abs(x) for x in v) // span) if v else 0

    def act_codes(self, s, codes):
        return codes + self._delta[s]

    def act_inverse_codes(self, s, codes):
        return codes - self._delta[s]


class TableCocycle(Cocycle):
    """Explicit permutations of a finite vertex list.

    ``actions[s][i]`` is the index of the image of ``vertices[i]``.
    """

    kind = "table"

    def __init__(self, symbols, vertices: Sequence, actions: dict, origin=None):
        symbols = tuple(symbols)
        self.vertices = list(vertices)
        n = len(self.vertices)
        super().__init__(symbols, self.vertices[0] if origin is None else origin)
        self._pos = {v: i for i, v in enumerate(self.vertices)}
        self._fwd, self._inv = [], []
        for s in symbols:
            perm = [int(x) for x in actions[s]]
            if sorted(perm) != list(range(n)):
                raise CocycleError(f"action of {s!r} is not a permutation of {n} vertices")
            inv = [0] * n
            for i, j in enumerate(perm):
                inv[j] = i
            self._fwd.append(np.array(perm, dtype=np.int64))
            self._inv.append(np.array(inv, dtype=np.int64))

    def act(self, symbol, v):
        return self.vertices[self._fwd[self.sym_index(symbol)][self._pos[v]]]

    def act_inverse(self, symbol, v):
        return self.vertices[self._inv[self.sym_index(symbol)][self._pos[v]]]

    def action_key(self, word):
        perm = np.arange(len(self.vertices))
        for s in word:
            perm = self._fwd[self.sym_index(s)][perm]
        return tuple(perm.tolist())

    def encode(self, v):
        return self._pos[v]

    def decode(self, code):
        return self.vertices[int(code)]

    def act_codes(self, s, codes):
        return self._fwd[s][codes]

    def act_inverse_codes(self, s, codes):
        return self._inv[s][codes]


# graph extensions ----------------------------------------------------------------

@dataclass
class GraphExtension:
    """Skew product T(x, g) = (theta x, kappa_x(g)) over a Markov base."""

    base: MarkovBase
    cocycle: Cocycle
    root: Hashable = None
    name: str = ""
    _graph: WeightedDigraph | None = field(default=None, repr=False)

    def __post_init__(self):
        if tuple(self.cocycle.symbols) != tuple(self.base.alphabet):
            raise CocycleError(
                f"cocycle symbols {self.cocycle.symbols} differ from alphabet {self.base.alphabet}")
        if self.root is None:
            self.root = self.cocycle.origin

    @property
    def graph(self) -> WeightedDigraph:
        if self._graph is None:
            self._graph = canonical_weight(self)
        return self._graph

    def weights(self) -> list:
        """Length-1 cylinder masses p_a (Bernoulli) or pi_a (Markov)."""
        return list(self.base.pi)


def kappa_word(E: GraphExtension, w: Sequence, v):
    """Apply ``w`` first-symbol-first: kappa_{w_n} o ... o kappa_{w_1}(v)."""
    w = check_word(E.base, w)
    return E.cocycle.act_word(w, v)


def canonical_weight(E: GraphExtension) -> WeightedDigraph:
    """Weighted graph with p(v -> t) = total mass of symbols moving v to t."""
    cc, base = E.cocycle, E.base
    syms = base.alphabet
    wts = base.pi

    def _collect(pairs):
        out: dict = {}
        for t, p in pairs:
            out[t] = out.get(t, 0) + p
        return list(out.items())

    def out_edges(v):
        return _collect((cc.act(s, v), p) for s, p in zip(syms, wts))

    def in_edges(v):
        return _collect((cc.act_inverse(s, v), p) for s, p in zip(syms, wts))

    return WeightedDigraph(E.root, out_edges, in_edges)


def vertex_ball(E: GraphExtension, radius: int, center=None, undirected: bool = True) -> list:
    """Vertices within ``radius`` steps (actions and, if undirected, inverses)."""
    cc = E.cocycle
    center = E.root if center is None else center
    seen = {center: 0}
    order = [center]
    queue = deque([center])
    while queue:
        v = queue.popleft()
        d = seen[v]
        if d >= radius:
            continue
        nbrs = [cc.act(s, v) for s in cc.symbols]
        if undirected:
            nbrs += [cc.act_inverse(s, v) for s in cc.symbols]
        for t in nbrs:
            if t not in seen:
                seen[t] = d + 1
                order.append(t)
                queue.append(t)
    return order


def check_bijective_on(E: GraphExtension, vertices: Iterable) -> bool:
    """Each symbol acts injectively on ``vertices`` and inverts correctly."""
    vs = list(vertices)
    for s in E.cocycle.symbols:
        imgs = [E.cocycle.act(s, v) for v in vs]
        if len(set(imgs)) != len(vs):
            return False
        if any(E.cocycle.act_inverse(s, t) != v for v, t in zip(vs, imgs)):
            return False
    return True


# uniform loops ---------------------------------------------------------------------

@dataclass
class LoopReport:
    status: str  # "verified" | "inconclusive"
    n: int | None
    J: list
    radius: int
    details: dict = field(default_factory=dict)


def check_uniform_loops(E: GraphExtension, max_power: int, radius: int,
                        max_combinations: int = 200000) -> LoopReport:
    """Search the smallest n and a finite word set J in W^n giving every ball vertex a loop.

    The witness is the lexicographically least J of minimum size.  Results
    only cover the ball of the given radius.
    """
    if max_power < 1 or radius < 1:
        raise ValueError("max_power and radius must be >= 1")
    layers = vertex_ball_levels(E, radius)
    ball = [v for v, _ in layers]
    dist = dict(layers)
    index = {v: i for i, v in enumerate(ball)}
    full = (1 << len(ball)) - 1
    details = {}
    for n in range(1, max_power + 1):
        words = E.base.words(n)
        covers = []
        for w in words:
            m = 0
            for v in ball:
                if E.cocycle.act_word(w, v) == v:
                    m |= 1 << index[v]
            covers.append(m)
        J = _min_cover(words, covers, full, max_combinations)
        if J is not None:
            return LoopReport("verified", n, J, radius, {"ball_size": len(ball)})
        # largest ball covered by a greedy word set
        greedy = _greedy_cover(words, covers, full)
        covered = 0
        for w in greedy:
            covered |= covers[words.index(w)]
        bad = [dist[v] for v in ball if not covered >> index[v] & 1]
        details[n] = {"best_J": greedy, "covered_radius": min(bad) - 1 if bad else radius}
    return LoopReport("inconclusive", None, [], radius, details)


def vertex_ball_levels(E: GraphExtension, radius: int) -> list[tuple]:
    cc = E.cocycle
    seen = {E.root: 0}
    order = [(E.root, 0)]
    queue = deque([E.root])
    while queue:
        v = queue.popleft()
        d = seen[v]
        if d >= radius:
            continue
        for s in cc.symbols:
            for t in (cc.act(s, v), cc.act_inverse(s, v)):
                if t not in seen:
                    seen[t] = d + 1
                    order.append((t, d + 1))
                    queue.append(t)
    return order


def _min_cover(words, covers, full, max_combinations):
    useful = [i for i, m in enumerate(covers) if m]
    union = 0
    for i in useful:
        union |= covers[i]
    if union != full:
        return None
    tried = 0
    for size in range(1, len(useful) + 1):
        for combo in itertools.combinations(useful, size):
            tried += 1
            m = 0
            for i in combo:
                m |= covers[i]
            if m == full:
                return [words[i] for i in combo]
            if tried >= max_combinations:
                return _greedy_cover(words, covers, full)
    return None


def _greedy_cover(words, covers, full):
    chosen, got = [], 0
    while got != full:
        i = max(range(len(words)), key=lambda j: (bin(covers[j] & ~got).count("1"), -j))
        if covers[i] & ~got == 0:
            break
        chosen.append(words[i])
        got |= covers[i]
    return chosen


# topological transitivity -----------------------------------------------------------

@dataclass
class TransitivityReport:
    status: str  # "verified-on-ball" | "counterexample" | "inconclusive"
    radius: int
    witness: tuple | None = None  # (from_pair, to_pair) that failed


def check_transitivity(E: GraphExtension, radius: int) -> TransitivityReport:
    """Strong connectivity of the (symbol, vertex) chain on the ball's closure."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    bad = _transitivity_failure(E, radius, radius + 1)
    if bad is None:
        return TransitivityReport("verified-on-ball", radius)
    # a failure that disappears on a much larger ball was a truncation artefact
    if _transitivity_failure(E, radius, 2 * radius + 1) is None:
        return TransitivityReport("inconclusive", radius, bad)
    return TransitivityReport("counterexample", radius, bad)


def _transitivity_failure(E, radius, closure):
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    if isinstance(E.cocycle, TableCocycle):
        # a finite table is checked on every vertex, not just the root's orbit
        levels = [(v, 0) for v in E.cocycle.vertices]
    else:
        levels = vertex_ball_levels(E, closure)
    dist = dict(levels)
    verts = [v for v, _ in levels]
    vid = {v: i for i, v in enumerate(verts)}
    A = E.base.size
    rows, cols = [], []
    for v in verts:
        for a in range(A):
            t = E.cocycle.act(E.base.alphabet[a], v)
            if t not in vid:
                continue
            for b in range(A):
                if E.base.admissibility[a][b]:
                    rows.append(vid[v] * A + a)
                    cols.append(vid[t] * A + b)
    N = len(verts) * A
    M = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(N, N)).tocsr()
    _, labels = connected_components(M, directed=True, connection="strong")
    inner = [vid[v] * A + a for v in verts if dist[v] <= radius for a in range(A)]
    first = labels[inner[0]]
    for k in inner:
        if labels[k] != first:
            def pair(i):
                return (E.base.alphabet[i % A], verts[i // A])
            return (pair(inner[0]), pair(k))
    return None


# symmetry ----------------------------------------------------------------------------

@dataclass
class SymmetryReport:
    C: dict  # N -> list of C_n (n = 1..n_max), math.inf where unbounded
    N: int  # spread used for the verdict
    slope: float
    verdict: str  # "symmetric-evidence" | "asymmetric-evidence"
    note: str = "finite-n evidence, not a proof"


SYMMETRY_SLOPE_TOL = 1e-2


def check_symmetry(E: GraphExtension, n_max: int, pairs: Sequence[tuple],
                   spreads: Sequence[int] = (0, 1, 2)) -> SymmetryReport:
    """Fit the constants C_n bounding forward by spread-backward transition masses."""
    from .walkdp import transition_table

    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    horizon = n_max + max(spreads)
    sources = sorted({v for p in pairs for v in p}, key=repr)
    tables = {v: transition_table(E, v, horizon, targets=sources) for v in sources}
    C = {}
    for N in spreads:
        seq = []
        for n in range(1, n_max + 1):
            c = Fraction(0) if E.base.exact else 0.0
            for v, w in pairs:
                f = tables[v][n].get(w, 0)
                if not f:
                    continue
                b = sum(tables[w][k].get(v, 0) for k in range(max(n - N, 0), n + N + 1))
                if not b:
                    c = math.inf
                    break
                c = max(c, f / b)
            seq.append(c)
        C[N] = seq
    for N in spreads:
        seq = C[N]
        if all(c != math.inf for c in seq):
            break
    else:
        return SymmetryReport(C, spreads[-1], math.inf, "asymmetric-evidence")
    # steps without forward mass put no constraint on C_n and are skipped
    ns = [n for n in range(1, n_max + 1) if seq[n - 1] > 0]
    tail = ns[-max(2, len(ns) // 3):]
    logs = [math.log(float(seq[n - 1])) for n in tail]
    slope = float(np.polyfit(tail, logs, 1)[0]) if len(tail) >= 2 else 0.0
    verdict = "symmetric-evidence" if abs(slope) < SYMMETRY_SLOPE_TOL else "asymmetric-evidence"
    return SymmetryReport(C, N, slope, verdict)


def inverse_pairing(E: GraphExtension, radius: int = 3) -> dict | None:
    """Symbol pairing a -> a' with kappa_{a'} = kappa_a^{-1} and equal weights, if any.

    Checked on a vertex ball.  Returns None when some symbol has no partner.
    """
    ball = vertex_ball(E, radius)
    cc = E.cocycle
    pairing = {}
    for a in cc.symbols:
        for b in cc.symbols:
            if E.base.symbol_weight(a) != E.base.symbol_weight(b):
                continue
            if all(cc.act(b, v) == cc.act_inverse(a, v) for v in ball):
                pairing[a] = b
                break
        else:
            return None
    return pairing


def almost_invariance_defect(E: GraphExtension, A: Iterable):
    """sum_a p_a |kappa_a(A) symmetric-difference A| / |A|."""
    A = set(A)
    if not A:
        raise ValueError("defect of the empty set")
    tot = 0
    for s, p in zip(E.base.alphabet, E.base.pi):
        img = {E.cocycle.act(s, v) for v in A}
        tot += p * len(img ^ A)
    return tot / len(A) if not E.base.exact else Fraction(tot) / len(A)
