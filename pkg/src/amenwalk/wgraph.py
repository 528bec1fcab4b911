"""Lazily discovered weighted digraphs, epsilon-boundaries and Følner search."""
from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12


class GraphError(RuntimeError):
    pass


class BudgetExceeded(GraphError):
    pass


class WeightedDigraph:
    """A directed graph whose vertices are discovered on demand from ``root``.

    ``out_edges(key)`` returns ``[(target_key, weight), ...]``.  Vertex ids are
    assigned in discovery order so repeated runs number vertices identically.
    ``in_edges`` is optional; when given, boundary updates in the greedy Følner
    search are local.
    """

    def __init__(self, root: Hashable, out_edges: Callable[[Hashable], list],
                 in_edges: Callable[[Hashable], list] | None = None,
                 budget: int | None = None, check_rows: bool = True):
        self.root = root
        self._out_fn = out_edges
        self._in_fn = in_edges
        self.budget = budget
        self.check_rows = check_rows
        self._ids: dict[Hashable, int] = {}
        self._keys: list[Hashable] = []
        self._out: dict[int, list[tuple[int, object]]] = {}
        self._in: dict[int, list[tuple[int, object]]] = {}
        self.vertex_id(root)

    @classmethod
    def from_edges(cls, edges: dict, root=None) -> "WeightedDigraph":
        """Finite graph from ``{v: [(t, p), ...]}``."""
        edges = {v: list(es) for v, es in edges.items()}
        if root is None:
            root = next(iter(edges))
        preds: dict = {v: [] for v in edges}
        for v, es in edges.items():
            for t, p in es:
                preds.setdefault(t, []).append((v, p))
        return cls(root, lambda v: edges.get(v, []), lambda v: preds.get(v, []))

    # vertex store -----------------------------------------------------------

    def vertex_id(self, key: Hashable) -> int:
        i = self._ids.get(key)
        if i is None:
            if self.budget is not None and len(self._keys) >= self.budget:
                raise BudgetExceeded(f"vertex budget {self.budget} exhausted")
            i = len(self._keys)
            self._ids[key] = i
            self._keys.append(key)
        return i

    def key(self, vid: int) -> Hashable:
        return self._keys[vid]

    def known(self, key: Hashable) -> bool:
        return key in self._ids

    @property
    def n_discovered(self) -> int:
        return len(self._keys)

    def out_edges(self, vid: int) -> list[tuple[int, object]]:
        es = self._out.get(vid)
        if es is None:
            raw = self._out_fn(self._keys[vid])
            es = [(self.vertex_id(t), p) for t, p in raw]
            if self.check_rows and es:
                _check_row(self._keys[vid], [p for _, p in es])
            self._out[vid] = es
        return es

    def in_edges(self, vid: int) -> list[tuple[int, object]]:
        if self._in_fn is None:
            raise GraphError("graph has no in-edge generator")
        es = self._in.get(vid)
        if es is None:
            es = [(self.vertex_id(s), p) for s, p in self._in_fn(self._keys[vid])]
            self._in[vid] = es
        return es

    def ball(self, radius: int, center: int = 0, undirected: bool = False) -> list[int]:
        """Vertex ids within ``radius`` forward steps of ``center`` (BFS order)."""
        return [v for v, _ in self.ball_levels(radius, center, undirected)]

    def ball_levels(self, radius, center=0, undirected=False):
        dist = {center: 0}
        order = [(center, 0)]
        queue = deque([center])
        while queue:
            v = queue.popleft()
            d = dist[v]
            if d >= radius:
                continue
            nbrs = [t for t, p in self.out_edges(v) if p > 0]
            if undirected:
                nbrs += [s for s, p in self.in_edges(v) if p > 0]
            for t in nbrs:
                if t not in dist:
                    dist[t] = d + 1
                    order.append((t, d + 1))
                    queue.append(t)
        return order

    def closed_component(self, limit: int) -> list[int] | None:
        """All vertices reachable from the root if there are at most ``limit``."""
        seen = {0}
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for t, p in self.out_edges(v):
                if p > 0 and t not in seen:
                    seen.add(t)
                    if len(seen) > limit:
                        return None
                    queue.append(t)
        return sorted(seen)


def _check_row(key, weights):
    if isinstance(weights[0], Fraction) and all(isinstance(p, Fraction) for p in weights):
        s = sum(weights, Fraction(0))
        ok = s == 1
    else:
        s = math.fsum(float(p) for p in weights)
        ok = abs(s - 1.0) <= ROW_SUM_TOL
    if not ok:
        raise GraphError(f"out-weights at vertex {key!r} sum to {s}, not 1")
    if any(p < 0 or p > 1 for p in weights):
        raise GraphError(f"edge weight outside [0, 1] at vertex {key!r}")


# boundaries -----------------------------------------------------------------

def epsilon_boundary(G: WeightedDigraph, K: Iterable[int], eps=0) -> set[int]:
    """Vertices of K with an out-edge of weight > eps leaving K."""
    K = set(K)
    return {v for v in K if any(p > eps and t not in K for t, p in G.out_edges(v))}


def isoperimetric_ratio(G: WeightedDigraph, K: Iterable[int], eps=0) -> Fraction:
    K = set(K)
    if not K:
        raise GraphError("isoperimetric ratio of the empty set")
    return Fraction(len(epsilon_boundary(G, K, eps)), len(K))


def prune_graph(G: WeightedDigraph, vertices: Iterable[int], eps) -> dict[int, list[int]]:
    """Unweighted graph G_eps on ``vertices``: keep edges of weight > eps."""
    return {v: [t for t, p in G.out_edges(v) if p > eps] for v in vertices}


def gerl_boundary(adj: dict[int, list[int]], K: Iterable[int]) -> set[int]:
    K = set(K)
    return {v for v in K if any(t not in K for t in adj[v])}


# Følner search ----------------------------------------------------------------

@dataclass
class FolnerResult:
    epsilon: object
    ratio: Fraction
    vertices: list[int]
    certificate: bool
    keys: list = field(default_factory=list)
    candidates: list = field(default_factory=list)  # (label, size, ratio) history

    @property
    def set_size(self) -> int:
        return len(self.vertices)

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon, "ratio": self.ratio, "set_size": self.set_size,
                "certificate": self.certificate, "vertices": [str(k) for k in self.keys]}


def folner_search(G: WeightedDigraph, eps, target_ratio, budget: int = 10**5,
                  max_exchange: int = 200) -> FolnerResult:
    """Search balls around the root, then greedily grow the best ball.

    Stops at the first candidate whose ratio is <= ``target_ratio``.  A failed
    search is inconclusive; it never certifies non-amenability.
    """
    if eps <= 0 or target_ratio <= 0:
        raise GraphError("eps and target_ratio must be positive")
    G.budget = budget if G.budget is None else min(G.budget, budget)
    target = Fraction(target_ratio) if not isinstance(target_ratio, float) else target_ratio
    best: tuple[Fraction, list[int]] | None = None
    history = []

    def consider(label, K, ratio):
        nonlocal best
        history.append((label, len(K), ratio))
        if best is None or ratio < best[0] or (ratio == best[0] and len(K) < len(best[1])):
            best = (ratio, sorted(K))
        return ratio <= target

    levels: list[list[int]] = []
    try:
        order = [0]
        dist = {0: 0}
        r = 0
        frontier = [0]
        while True:
            K = set(order)
            done = consider(f"ball {r}", K, isoperimetric_ratio(G, K, eps))
            if done:
                return _result(eps, best, target, G, history)
            nxt = []
            for v in frontier:
                for t, p in G.out_edges(v):
                    if p > 0 and t not in dist:
                        dist[t] = r + 1
                        nxt.append(t)
            if not nxt:
                break  # finite component exhausted
            order.extend(nxt)
            frontier = nxt
            r += 1
    except BudgetExceeded:
        pass
    if best is None:
        raise BudgetExceeded("budget exhausted before any candidate set was evaluated")
    try:
        _greedy_exchange(G, eps, target, best[1], consider, max_exchange)
    except BudgetExceeded:
        pass
    return _result(eps, best, target, G, history)


def _result(eps, best, target, G, history):
    ratio, K = best
    return FolnerResult(eps, ratio, K, ratio <= target, [G.key(v) for v in K], history)


def _greedy_exchange(G, eps, target, start, consider, max_exchange):
    """Repeatedly add the outside vertex giving the smallest new ratio."""
    K = set(start)
    bd = epsilon_boundary(G, K, eps)
    for step in range(max_exchange):
        cands = sorted({t for v in bd for t, p in G.out_edges(v) if p > eps and t not in K})
        if not cands:
            return
        best_c, best_b = None, None
        for c in cands:
            nb = _boundary_after_add(G, K, bd, c, eps)
            if best_b is None or nb < best_b:
                best_c, best_b = c, nb
        K.add(best_c)
        bd = epsilon_boundary(G, K, eps) if G._in_fn is None else _update_boundary(G, K, bd, best_c, eps)
        if consider(f"greedy {step + 1}", K, Fraction(len(bd), len(K))):
            return


def _boundary_after_add(G, K, bd, c, eps) -> int:
    """|boundary| after adding c, computed locally."""
    K2 = K | {c}
    size = len(bd)
    if any(p > eps and t not in K2 for t, p in G.out_edges(c)):
        size += 1
    preds = [s for s, p in G.in_edges(c) if p > eps] if G._in_fn is not None else list(bd)
    for s in set(preds):
        if s in bd and not any(p > eps and t not in K2 for t, p in G.out_edges(s)):
            size -= 1
    return size


def _update_boundary(G, K, bd, c, eps):
    bd = set(bd)
    if any(p > eps and t not in K for t, p in G.out_edges(c)):
        bd.add(c)
    for s, p in G.in_edges(c):
        if s in bd and not any(q > eps and t not in K for t, q in G.out_edges(s)):
            bd.discard(s)
    return bd


# strong isoperimetric constant --------------------------------------------------

@dataclass
class ExpansionResult:
    value: Fraction
    witness: list[int]
    exhaustive: bool  # False means the value is only an upper bound


def gerl_expansion_constant(G: WeightedDigraph, eps=0, max_exhaustive: int = 20,
                            samples: int = 20000, seed: int = 0) -> ExpansionResult:
    """min over nonempty proper K of |boundary K| / |K| on a finite graph."""
    V = G.closed_component(limit=10**6)
    if V is None:
        raise GraphError("graph is not finite within 10^6 vertices")
    n = len(V)
    if n < 2:
        raise GraphError("need at least two vertices for a proper subset")
    pos = {v: i for i, v in enumerate(V)}
    nbr_mask = [0] * n
    for v in V:
        for t, p in G.out_edges(v):
            if p > eps:
                nbr_mask[pos[v]] |= 1 << pos[t]
    if n <= max_exhaustive:
        masks = np.arange(1, (1 << n) - 1, dtype=np.int64)
        size = np.zeros(masks.shape, dtype=np.int64)
        bsize = np.zeros(masks.shape, dtype=np.int64)
        for i in range(n):
            inside = (masks >> i) & 1
            size += inside
            leaks = (np.int64(nbr_mask[i]) & ~masks) != 0
            bsize += inside * leaks
        # exact min of bsize/size via cross-multiplication
        ratios = bsize / size
        cand = np.flatnonzero(ratios <= ratios.min() + 1e-12)
        best = min(cand, key=lambda j: (Fraction(int(bsize[j]), int(size[j])), int(masks[j])))
        m = int(masks[best])
        return ExpansionResult(Fraction(int(bsize[best]), int(size[best])),
                               [V[i] for i in range(n) if m >> i & 1], True)
    rng = np.random.default_rng(seed)
    adj = {v: [t for t, p in G.out_edges(v) if p > eps] for v in V}
    best_val, best_K = None, None
    candidates: list[set[int]] = []
    for v in V[: min(n, 50)]:
        for rad in range(1, 8):
            K = set(G.ball(rad, v))
            if len(K) < n:
                candidates.append(K)
    for _ in range(samples):
        k = int(rng.integers(1, n))
        candidates.append(set(rng.choice(V, size=k, replace=False).tolist()))
    for K in candidates:
        val = Fraction(len(gerl_boundary(adj, K)), len(K))
        if best_val is None or val < best_val:
            best_val, best_K = val, sorted(K)
    return ExpansionResult(best_val, best_K, False)


def lattice_graph(dim: int = 1) -> WeightedDigraph:
    """Nearest-neighbour graph of Z^dim with equal weights 1/(2 dim) (helper for tests)."""
    w = Fraction(1, 2 * dim)
    steps = []
    for i in range(dim):
        for s in (1, -1):
            e = [0] * dim
            e[i] = s
            steps.append(tuple(e))

    def out(v):
        return [(tuple(a + b for a, b in zip(v, e)), w) for e in steps]

    return WeightedDigraph(tuple([0] * dim), out, out)
