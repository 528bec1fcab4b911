"""Free groups, Stallings foldings and Schreier coset graphs.

Letters are signed generator indices: ``1..k`` for generators ``a, b, ...``
and ``-1..-k`` for their inverses ``A, B, ...``.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .extension import Cocycle, CocycleError, INT64_SAFE

FreeWord = tuple  # tuple[int, ...], freely reduced


class WordError(ValueError):
    pass


def parse_word(s: str, k: int) -> FreeWord:
    """Parse ``"abA"`` style text into a freely reduced word over rank k."""
    out: list[int] = []
    for pos, ch in enumerate(s.strip()):
        if ch.isspace():
            continue
        if not ch.isalpha() or not ch.isascii():
            raise WordError(f"invalid character {ch!r} at position {pos}")
        g = ord(ch.lower()) - ord("a") + 1
        if g > k:
            raise WordError(f"letter {ch!r} at position {pos} exceeds rank {k}")
        out.append(g if ch.islower() else -g)
    return reduce_word(out)


def reduce_word(w: Iterable[int]) -> FreeWord:
    stack: list[int] = []
    for x in w:
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


def inverse_word(w: Sequence[int]) -> FreeWord:
    return tuple(-x for x in reversed(w))


def multiply(*ws: Sequence[int]) -> FreeWord:
    return reduce_word(itertools.chain.from_iterable(ws))


def word_to_str(w: Sequence[int]) -> str:
    return "".join(chr(ord("a") + abs(x) - 1) if x > 0 else chr(ord("A") + abs(x) - 1)
                   for x in w)


def letters(k: int) -> list[int]:
    """Signed letters in canonical order a, A, b, B, ..."""
    return [x for g in range(1, k + 1) for x in (g, -g)]


@dataclass(frozen=True)
class SubgroupAutomaton:
    """Folded core graph of a subgroup; ``edges[(v, x)] = w`` for signed letters x.

    Both directions are stored: an edge v -a-> w also appears as w -A-> v.
    Vertex 0 is the base.
    """

    rank: int
    n_states: int
    edges: dict

    @property
    def base(self) -> int:
        return 0

    @property
    def complete(self) -> bool:
        return all((v, x) in self.edges for v in range(self.n_states) for x in letters(self.rank))

    @property
    def index(self) -> int | None:
        return self.n_states if self.complete else None

    def step(self, v: int, x: int) -> int | None:
        return self.edges.get((v, x))

    def positive_edges(self) -> list[tuple[int, str, int]]:
        return sorted((v, word_to_str((x,)), w) for (v, x), w in self.edges.items() if x > 0)

    def to_json(self) -> dict:
        return {"states": self.n_states, "base": 0,
                "edges": [list(e) for e in self.positive_edges()],
                "complete": self.complete, "index": self.index}


def stallings_fold(generators: Sequence[Sequence[int]], k: int) -> SubgroupAutomaton:
    """Fold the wedge of generator loops at the base into the subgroup's core graph."""
    if not generators:
        raise WordError("need at least one generator (use the empty word for the trivial group)")
    gens = [reduce_word(g) for g in generators]
    for g in gens:
        if any(abs(x) > k or x == 0 for x in g):
            raise WordError(f"generator {g} uses letters beyond rank {k}")
    raw: list[tuple[int, int, int]] = []  # (u, letter, v) with positive letters
    n = 1
    for g in gens:
        cur = 0
        for i, x in enumerate(g):
            nxt = 0 if i == len(g) - 1 else n
            if nxt == n:
                n += 1
            raw.append((cur, x, nxt) if x > 0 else (nxt, -x, cur))
            cur = nxt

    parent = list(range(n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def union(a, b):
        a, b = find(a), find(b)
        if a != b:
            parent[max(a, b)] = min(a, b)

    # fold until every (vertex, letter) has at most one target
    changed = True
    while changed:
        changed = False
        seen: dict[tuple[int, int], int] = {}
        for u, x, v in raw:
            u, v = find(u), find(v)
            for key, val in (((u, x), v), ((v, -x), u)):
                old = seen.get(key)
                if old is None:
                    seen[key] = val
                elif find(old) != find(val):
                    union(old, val)
                    changed = True
    edges = {}
    for u, x, v in raw:
        u, v = find(u), find(v)
        edges[(u, x)] = v
        edges[(v, -x)] = u
    edges = _trim(edges, base=0)
    return _canonical(edges, k)


def _trim(edges: dict, base: int) -> dict:
    """Remove non-base vertices of degree one until none remain."""
    while True:
        deg: dict[int, int] = {}
        for (v, _x) in edges:
            deg[v] = deg.get(v, 0) + 1
        leaves = {v for v, d in deg.items() if d == 1 and v != base}
        if not leaves:
            return edges
        edges = {(v, x): w for (v, x), w in edges.items() if v not in leaves and w not in leaves}


def _canonical(edges: dict, k: int) -> SubgroupAutomaton:
    """Renumber vertices by BFS from the base, exploring letters a, A, b, B, ..."""
    order = {0: 0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for x in letters(k):
            w = edges.get((v, x))
            if w is not None and w not in order:
                order[w] = len(order)
                queue.append(w)
    new = {(order[v], x): order[w] for (v, x), w in edges.items() if v in order}
    return SubgroupAutomaton(k, len(order), dict(sorted(new.items())))


def contains(M: SubgroupAutomaton, w: Sequence[int]) -> bool:
    """Membership: w reads a closed path at the base."""
    v = 0
    for x in reduce_word(w):
        v = M.edges.get((v, x))
        if v is None:
            return False
    return v == 0


def automaton_from_permutations(perms: Sequence[Sequence[int]], point: int = 0) -> SubgroupAutomaton:
    """Schreier graph of the stabiliser of ``point``; generator g acts by ``perms[g-1]``.

    Points move by the right action: the coset of point p times generator g is
    ``perms[g-1][p]``.
    """
    k = len(perms)
    orbit = {point: 0}
    queue = deque([point])
    edges = {}
    while queue:
        p = queue.popleft()
        for g in range(1, k + 1):
            q = perms[g - 1][p]
            if q not in orbit:
                orbit[q] = len(orbit)
                queue.append(q)
    inv = [{perm[p]: p for p in range(len(perm))} for perm in perms]
    for p, i in orbit.items():
        for g in range(1, k + 1):
            edges[(i, g)] = orbit[perms[g - 1][p]]
            edges[(i, -g)] = orbit[inv[g - 1][p]]
    return _canonical(edges, k)


def schreier_generators(M: SubgroupAutomaton) -> list[FreeWord]:
    """Free generators of the subgroup read off a spanning tree of the automaton."""
    tree = {0: ()}
    queue = deque([0])
    used = set()
    while queue:
        v = queue.popleft()
        for x in letters(M.rank):
            w = M.edges.get((v, x))
            if w is not None and w not in tree:
                tree[w] = tree[v] + (x,)
                used.add((v, x))
                used.add((w, -x))
                queue.append(w)
    gens = []
    for (v, x), w in M.edges.items():
        if x > 0 and (v, x) not in used:
            gens.append(multiply(tree[v], (x,), inverse_word(tree[w])))
    return sorted(gens, key=lambda g: (len(g), g)) or [()]


def normal_core(M: SubgroupAutomaton) -> SubgroupAutomaton:
    """Cayley graph of F_k / H_0 where H_0 is the intersection of all conjugates of H."""
    if not M.complete:
        raise WordError("infinite index; normal core not computable by this tool")
    n = M.n_states
    gens = {x: tuple(M.edges[(v, x)] for v in range(n)) for x in letters(M.rank)}
    ident = tuple(range(n))
    order = {ident: 0}
    queue = deque([ident])
    edges = {}
    while queue:
        p = queue.popleft()
        for x in letters(M.rank):
            q = tuple(gens[x][p[i]] for i in range(n))
            if q not in order:
                order[q] = len(order)
                queue.append(q)
            edges[(order[p], x)] = order[q]
    return _canonical(edges, M.rank)


def ball_words(k: int, radius: int) -> list[FreeWord]:
    """All reduced words of length <= radius, shortlex order."""
    out = [()]
    layer = [()]
    for _ in range(radius):
        layer = [w + (x,) for w in layer for x in letters(k) if not w or w[-1] != -x]
        out.extend(layer)
    return out


# lazy Schreier graph cocycle --------------------------------------------------------

class SchreierCocycle(Cocycle):
    """Right action of symbols (via ``gamma``) on the cosets of H.

    A vertex is ``(state, suffix)``: an automaton state plus a reduced word
    that leaves the core through a missing edge and continues into a hanging
    tree.  Complete automata never grow trees.
    """

    kind = "schreier"

    def __init__(self, M: SubgroupAutomaton, symbols: Sequence[str], gamma: dict):
        super().__init__(symbols, (0, ()))
        self.M = M
        self.k = M.rank
        self.gamma = {s: reduce_word(gamma[s]) for s in self.symbols}
        for s, g in self.gamma.items():
            if any(abs(x) > self.k for x in g):
                raise CocycleError(f"gamma({s!r}) uses letters beyond rank {self.k}")
        S = M.n_states
        B = 2 * self.k + 1
        self._S, self._B = S, B
        # per-letter lookup tables; -1 marks a missing core edge
        self._next = {x: np.array([M.edges.get((v, x), -1) for v in range(S)], dtype=np.int64)
                      for x in letters(self.k)}
        top = INT64_SAFE // (S * 64)
        L = 0
        while B ** (L + 1) < top:
            L += 1
        # a symbol may push several letters
        self.max_code_steps = L // max(1, max(len(g) for g in self.gamma.values()))

    def code_depth(self, v) -> int:
        return len(v[1])

    def _digit(self, x):
        return 2 * x - 1 if x > 0 else -2 * x

    def step_letter(self, v, x):
        s, suf = v
        if suf:
            if suf[-1] == -x:
                return (s, suf[:-1])
            return (s, suf + (x,))
        t = self.M.edges.get((s, x))
        return (t, ()) if t is not None else (s, (x,))

    def act(self, symbol, v):
        for x in self.gamma[symbol]:
            v = self.step_letter(v, x)
        return v

    def act_inverse(self, symbol, v):
        for x in inverse_word(self.gamma[symbol]):
            v = self.step_letter(v, x)
        return v

    def action_key(self, word):
        return multiply(*(self.gamma[s] for s in word))

    def coset_of(self, w: Sequence[int]):
        """Vertex H.w for a free word w."""
        v = self.origin
        for x in reduce_word(w):
            v = self.step_letter(v, x)
        return v

    def representative(self, v) -> FreeWord:
        """A word w with H.w = v (shortest path through the core, then the suffix)."""
        s, suf = v
        paths = {0: ()}
        queue = deque([0])
        while queue and s not in paths:
            u = queue.popleft()
            for x in letters(self.k):
                t = self.M.edges.get((u, x))
                if t is not None and t not in paths:
                    paths[t] = paths[u] + (x,)
                    queue.append(t)
        return multiply(paths[s], suf)

    def encode(self, v):
        s, suf = v
        code = 0
        for x in suf:
            code = code * self._B + self._digit(x)
        return code * self._S + s

    def decode(self, code):
        code = int(code)
        s = code % self._S
        c = code // self._S
        digits = []
        while c:
            d = c % self._B
            digits.append((d + 1) // 2 if d % 2 else -(d // 2))
            c //= self._B
        return (s, tuple(reversed(digits)))

    def _letter_codes(self, x, codes):
        S, B = self._S, self._B
        s = codes % S
        suf = codes // S
        in_core = suf == 0
        nxt = self._next[x][s.astype(np.int64)] if codes.dtype != object else \
            np.array([self._next[x][int(i)] for i in s], dtype=object)
        core_target = np.where(nxt >= 0, nxt, s + self._digit(x) * S)
        last = suf % B
        popped = (suf // B) * S + s
        pushed = (suf * B + self._digit(x)) * S + s
        tree = np.where(last == self._digit(-x), popped, pushed)
        return np.where(in_core, core_target, tree)

    def act_codes(self, s, codes):
        for x in self.gamma[self.symbols[s]]:
            codes = self._letter_codes(x, codes)
        return codes

    def act_inverse_codes(self, s, codes):
        for x in inverse_word(self.gamma[self.symbols[s]]):
            codes = self._letter_codes(x, codes)
        return codes


def schreier_vertex_generator(M: SubgroupAutomaton, k: int | None = None,
                              symbols: Sequence[str] | None = None,
                              gamma: dict | None = None) -> SchreierCocycle:
    """Lazy coset-graph cocycle; by default symbols ``a, A, b, B, ...`` act as themselves."""
    k = M.rank if k is None else k
    if k != M.rank:
        raise WordError(f"automaton has rank {M.rank}, not {k}")
    if symbols is None:
        symbols = [word_to_str((x,)) for x in letters(k)]
    if gamma is None:
        gamma = {s: parse_word(s, k) for s in symbols}
    return SchreierCocycle(M, symbols, gamma)


# conditions (tt), (ul), (fc) ----------------------------------------------------------

@dataclass
class ConditionReport:
    status: str  # "witnessed" | "inconclusive"
    witness: object
    depth: int
    details: dict = field(default_factory=dict)


def _hat_words(base, gamma: dict, power: int, induced) -> list[tuple]:
    """(word, gamma-hat, first symbol, landing symbol or None) for the induced alphabet."""
    out = []
    if induced is not None:
        for r in induced.words:
            out.append((tuple(r.u), multiply(*(gamma[s] for s in r.u[:-1])), r.u[0], r.u[-1]))
    else:
        for w in base.words(power):
            out.append((tuple(w), multiply(*(gamma[s] for s in w)), w[0], None))
    return out


def _can_follow(base, prev, nxt) -> bool:
    """Whether hat word ``nxt`` may follow ``prev`` in a concatenation."""
    if prev is None:
        return True
    if prev[3] is not None:
        return nxt[2] == prev[3]
    return bool(base.admissibility[base.index(prev[0][-1])][base.index(nxt[2])])


def _cover(items: list, covers: list[int], full: int):
    chosen, got = [], 0
    while got != full:
        i = max(range(len(items)), key=lambda j: (bin(covers[j] & ~got).count("1"), -j),
                default=None)
        if i is None or covers[i] & ~got == 0:
            break
        chosen.append(items[i])
        got |= covers[i]
    return chosen, got


def check_tt_ul_fc(M: SubgroupAutomaton, base, gamma: dict, depth: int, power: int = 1,
                   induced=None, sample_radius: int = 2,
                   max_states: int = 200_000) -> dict[str, ConditionReport]:
    """Bounded-depth witness search for (tt), (ul) and (fc).

    The induced alphabet is ``induced.words`` when given, else the words of
    length ``power`` of the base.  Conjugate membership x in gHg^{-1} is tested
    as ``contains(M, g^{-1} x g)``.
    """
    if depth < 1:
        raise WordError("depth must be >= 1")
    k = M.rank
    gamma = {s: (parse_word(g, k) if isinstance(g, str) else reduce_word(g))
             for s, g in gamma.items()}
    missing = [s for s in base.alphabet if s not in gamma]
    if missing:
        raise WordError(f"gamma is not defined on {missing}")
    hat = _hat_words(base, gamma, power, induced)
    names = ["".join(h[0]) for h in hat]
    G = ball_words(k, depth)
    out = {}

    # (ul): a finite J with gamma-hat(u) in gHg^{-1} for every sampled g
    covers = []
    for _, x, _, _ in hat:
        m = 0
        for i, g in enumerate(G):
            if contains(M, multiply(inverse_word(g), x, g)):
                m |= 1 << i
        covers.append(m)
    J, got = _cover(names, covers, (1 << len(G)) - 1)
    if got == (1 << len(G)) - 1:
        out["ul"] = ConditionReport("witnessed", J, depth)
    else:
        bad = min(len(G[i]) for i in range(len(G)) if not got >> i & 1)
        out["ul"] = ConditionReport("inconclusive", None, depth,
                                    {"covered_depth": bad - 1, "best_J": J})

    # (fc): a finite K with gamma_v gamma-hat(u)^{-1} in gHg^{-1} for all g and symbols v
    pairs = [(v, g) for g in G for v in base.alphabet]
    full = (1 << len(pairs)) - 1
    cands = [(n, x) for n, (_, x, _, _) in zip(names, hat)]
    for extra in (False, True):
        if extra:
            cands += [(names[i] + "." + names[j], multiply(hat[i][1], hat[j][1]))
                      for i in range(len(hat)) for j in range(len(hat))
                      if _can_follow(base, hat[i], hat[j])]
        covers = []
        for _, x in cands:
            m = 0
            for i, (v, g) in enumerate(pairs):
                y = multiply(gamma[v], inverse_word(x))
                if contains(M, multiply(inverse_word(g), y, g)):
                    m |= 1 << i
            covers.append(m)
        K, got = _cover([n for n, _ in cands], covers, full)
        if got == full:
            break
    if got == full:
        out["fc"] = ConditionReport("witnessed", K, depth)
    else:
        bad = min(len(pairs[i][1]) for i in range(len(pairs)) if not got >> i & 1)
        out["fc"] = ConditionReport("inconclusive", None, depth, {"covered_depth": bad - 1})

    # (tt): gamma-hat(w) in gHh, i.e. the walk from H g^{-1} reaches H h
    cc = SchreierCocycle(M, list(gamma), gamma)
    S = ball_words(k, min(sample_radius, depth))
    found = {}
    for g in S:
        start = cc.coset_of(inverse_word(g))
        want = {cc.coset_of(h) for h in S}
        seen = {(start, None): ()}
        layer = [(start, None)]
        reached: dict = {}
        for _ in range(depth):
            nxt = []
            for v, last in layer:
                prev = hat[last] if last is not None else None
                for j, h in enumerate(hat):
                    if not _can_follow(base, prev, h):
                        continue
                    t = v
                    for x in h[1]:
                        t = cc.step_letter(t, x)
                    if (t, j) in seen:
                        continue
                    seen[(t, j)] = seen[(v, last)] + (j,)
                    nxt.append((t, j))
                    if t in want and t not in reached:
                        reached[t] = seen[(t, j)]
            layer = nxt
            if len(reached) == len(want) or len(seen) > max_states:
                break
        for h in S:
            t = cc.coset_of(h)
            if t in reached:
                found[(word_to_str(g), word_to_str(h))] = ".".join(names[j] for j in reached[t])
    total = len(S) ** 2
    if len(found) == total:
        out["tt"] = ConditionReport("witnessed", found, depth, {"pairs": total})
    else:
        out["tt"] = ConditionReport("inconclusive", None, depth,
                                    {"pairs": total, "witnessed": len(found)})
    return out
