"""First-return and modified-return inducing schemes on a union of 1-cylinders.

A return word ``u = a w b`` is stored with its landing symbol: ``a`` and ``b``
lie in Omega, ``w`` avoids Omega, and the return time is ``eta = |u| - 1``.
The induced cocycle moves by the acting part ``u[:-1]``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .extension import GraphExtension, vertex_ball_levels
from .schreier import SchreierCocycle, SubgroupAutomaton, WordError, multiply, parse_word
from .symdyn import MarkovBase, cylinder_measure
from .walkdp import RateReport, WalkEngine, _Dist, rate_report

MASS_WARNING = Fraction(99, 100)
EXP_TAIL_MARGIN = 0.02


class InducingError(ValueError):
    pass


@dataclass(frozen=True)
class ReturnWord:
    u: tuple
    eta: int
    nu: object  # mu([u]) / mu(Omega)

    @property
    def acting(self) -> tuple:
        return self.u[:-1]


@dataclass
class InducedSystem:
    base: MarkovBase
    omega: tuple
    words: list
    max_eta: int
    tail: object
    mode: str = "first-return"  # or "modified"
    adequacy: str = "adequate (first return)"
    warning: bool = False
    details: dict = field(default_factory=dict)

    @property
    def mu_omega(self):
        return sum((self.base.symbol_weight(a) for a in self.omega), self.base.zero)

    def eta_distribution(self) -> dict:
        out: dict = {}
        for r in self.words:
            out[r.eta] = out.get(r.eta, 0) + r.nu
        return dict(sorted(out.items()))

    def rows(self):
        cum = self.base.zero
        for r in self.words:
            cum += r.nu
            yield {"u": "".join(r.u), "eta": r.eta, "nu": r.nu, "cumulative": cum}


def _omega_symbols(base: MarkovBase, omega) -> tuple:
    if isinstance(omega, str):
        omega = [s for s in omega.strip().strip("[]").replace(",", " ").split()] \
            if any(c in omega for c in "[], ") else list(omega)
    om = tuple(sorted({base.alphabet[base.index(s)] for s in omega}, key=base.index))
    if not om:
        raise InducingError("Omega must be a nonempty set of symbols")
    return om


def first_return_words(base: MarkovBase, omega, max_eta: int,
                       max_words: int = 5_000_000) -> InducedSystem:
    """Depth-first enumeration of first-return words with eta <= max_eta."""
    if max_eta < 1:
        raise InducingError("max_eta must be >= 1")
    om = _omega_symbols(base, omega)
    inside = [s in om for s in base.alphabet]
    A = base.size
    mu_om = sum((base.symbol_weight(a) for a in om), base.zero)
    words = []
    for a in om:
        i = base.index(a)
        stack = [((i,), base.pi[i])]
        while stack:
            prefix, m = stack.pop()
            last = prefix[-1]
            # push in reverse so symbols come off the stack in alphabet order
            ext = []
            for b in range(A):
                if not base.admissibility[last][b]:
                    continue
                mb = m * base.transition(last, b)
                if inside[b]:
                    ext.append(("w", prefix + (b,), mb))
                elif len(prefix) < max_eta:
                    ext.append(("p", prefix + (b,), mb))
            for kind, w, mb in ext:
                if kind == "w":
                    words.append(ReturnWord(tuple(base.alphabet[j] for j in w), len(w) - 1,
                                            mb / mu_om))
                    if len(words) > max_words:
                        raise InducingError(f"more than {max_words} return words; lower max_eta")
            stack.extend((w, mb) for kind, w, mb in reversed(ext) if kind == "p")
    words.sort(key=lambda r: (r.u[0] != om[0], base.indices(r.u[:1]), r.eta,
                              base.indices(r.u)))
    total = sum((r.nu for r in words), base.zero)
    tail = base.one - total
    return InducedSystem(base, om, words, max_eta, tail, warning=total < MASS_WARNING)


# ---------------------------------------------------------------------------------
# tails and Kac

@dataclass
class TailReport:
    rate: float
    exponential: bool
    window: tuple
    alpha: float | None


def tail_rate(S: InducedSystem) -> TailReport:
    """limsup nu(eta = n)^{1/n}, fitted with a free polynomial factor over the top half."""
    dist = S.eta_distribution()
    if S.tail == 0:
        # the enumeration is complete: eta is bounded
        return TailReport(0.0, True, (min(dist), max(dist)), None)
    ks = [k for k, v in dist.items() if v > 0]
    if len(ks) < 8:
        raise InducingError(f"need >= 8 distinct return times, got {len(ks)}")
    top = ks[len(ks) // 2:]
    x = np.array(top, dtype=float)
    y = np.array([math.log(dist[k]) if not isinstance(dist[k], Fraction)
                  else math.log(dist[k].numerator) - math.log(dist[k].denominator)
                  for k in top])
    X = np.column_stack([np.ones_like(x), x, np.log(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    rate = min(math.exp(coef[1]), 1.0)
    return TailReport(rate, rate < 1 - EXP_TAIL_MARGIN, (top[0], top[-1]), float(-coef[2]))


@dataclass
class KacReport:
    expectation: object
    target: object
    defect: object
    tail_bound: object


def kac_check(S: InducedSystem) -> KacReport:
    """E_nu[eta] against 1/mu(Omega); the tail counts with eta = max_eta + 1."""
    if S.mode != "first-return":
        raise InducingError("Kac's identity applies to first returns only")
    exp = sum((r.eta * r.nu for r in S.words), S.base.zero)
    tail_part = (S.max_eta + 1) * S.tail
    expectation = exp + tail_part
    target = 1 / S.mu_omega
    return KacReport(expectation, target, abs(expectation - target), tail_part)


# ---------------------------------------------------------------------------------
# induced walk

class _InducedEngine:
    """Steps of the induced extension on Markov-form states with the next symbol in Omega."""

    def __init__(self, E: GraphExtension, S: InducedSystem, exact, budget, threads):
        self.eng = WalkEngine(E, exact, budget, threads, markov_form=True)
        self.S = S
        self.E = E
        self.om = [E.base.index(a) for a in S.omega]
        self.inside = np.zeros(E.base.size, dtype=bool)
        self.inside[self.om] = True
        if S.mode != "first-return":
            self._prepare_words()

    def _prepare_words(self):
        base, eng = self.E.base, self.eng
        mu_om = self.S.mu_omega
        qs = [r.nu * mu_om / base.symbol_weight(r.u[0]) for r in self.S.words]
        if eng.exact:
            qs = [Fraction(q) for q in qs]
            D = math.lcm(*[q.denominator for q in qs]) if qs else 1
            self.q = [int(q * D) for q in qs]
            self.Dq = D
        else:
            self.q = [float(q) for q in qs]
            self.Dq = 1

    def _split_taboo(self, step, d: _Dist) -> _Dist:
        """Run base steps until the produced symbol is in Omega (at most max_eta of them)."""
        eng, A = self.eng, self.eng.A
        landed = []
        cur = d
        for s in range(1, self.S.max_eta + 1):
            nxt = step(cur)
            hit = self.inside[(nxt.keys % A).astype(np.int64)]
            landed.append((s, _Dist(nxt.keys[hit], nxt.mass[hit], nxt.scale, nxt.depth)))
            cur = _Dist(nxt.keys[~hit], nxt.mass[~hit], nxt.scale, nxt.depth)
            if not len(cur):
                break
        last = landed[-1][0]
        scale = landed[-1][1].scale
        big = eng.exact and scale >= 1 << 62
        parts = []
        for s, part in landed:
            m = part.mass.astype(object) if big and part.mass.dtype != object else part.mass
            if eng.exact and last > s:
                m = m * eng.w.DP ** (last - s)
            parts.append((part.keys, m))
        dtype = object if big else landed[-1][1].mass.dtype
        return eng._merge(parts, scale, landed[-1][1].depth, dtype)

    def _words_step(self, d: _Dist, forward: bool) -> _Dist:
        eng, A, base, cc = self.eng, self.eng.A, self.E.base, self.eng.cc
        depth = d.depth + max(r.eta for r in self.S.words)
        d = eng._prepare(_Dist(d.keys, d.mass, d.scale, depth - 1), self.Dq)
        verts, cur = d.keys // A, d.keys % A
        parts = []
        for r, q in zip(self.S.words, self.q):
            a, b = base.index(r.u[0]), base.index(r.u[-1])
            sel = cur == (a if forward else b)
            if not sel.any():
                continue
            g = verts[sel]
            if forward:
                for s in r.acting:
                    g = cc.act_codes(base.index(s), g)
                parts.append((g * A + b, d.mass[sel] * q))
            else:
                for s in reversed(r.acting):
                    g = cc.act_inverse_codes(base.index(s), g)
                parts.append((g * A + a, d.mass[sel] * q))
        return eng._merge(parts, d.scale * self.Dq, depth, d.mass.dtype)

    def forward(self, d):
        if self.S.mode == "first-return":
            return self._split_taboo(self.eng.step_forward, d)
        return self._words_step(d, True)

    def backward(self, d):
        if self.S.mode == "first-return":
            return self._split_taboo(self.eng.step_backward, d)
        return self._words_step(d, False)

    def returns(self, n_max: int, o=None):
        """nu{ kappa-hat^n(o) = o } for n = 0..n_max (meet-in-the-middle)."""
        eng = self.eng
        o = self.E.root if o is None else o
        mu = self.S.mu_omega
        mu = Fraction(mu) if eng.exact else float(mu)
        F = eng.forward_init(o, self.om)
        B = eng.backward_init(o, self.om)
        out = [eng.inner(F, B) / mu]
        j = 0
        while 2 * j < n_max:
            j += 1
            F = self.forward(F)
            out.append(eng.inner(F, B) / mu)
            if 2 * j <= n_max:
                B = self.backward(B)
                out.append(eng.inner(F, B) / mu)
        return out


@dataclass
class InducedRates:
    R_S: RateReport
    R_Omega_T: RateReport
    R_T: RateReport
    tail: object

    @property
    def chain_holds(self) -> bool:
        return self.R_S.value <= self.R_Omega_T.value <= self.R_T.value + 0.01


def induced_rates(E: GraphExtension, S: InducedSystem, o=None, n_max: int = 16,
                  n_induced: int | None = None, estimator: str = "fit",
                  exact: bool | None = None, budget: int | None = None,
                  threads: int = 1) -> InducedRates:
    """R(T), R_Omega(T) and R(S); the untruncated tail is carried, not renormalized."""
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    n_induced = n_max if n_induced is None else n_induced
    eng = WalkEngine(E, exact, budget, threads)
    p_T = list(eng.returns(n_max, o, o))
    p_Om = list(eng.returns(n_max, o, o, S.omega))
    p_S = _InducedEngine(E, S, exact, budget, threads).returns(n_induced, o)
    return InducedRates(rate_report(p_S, estimator), rate_report(p_Om, estimator),
                        rate_report(p_T, estimator), S.tail)


# ---------------------------------------------------------------------------------
# finite covers

@dataclass
class CoverReport:
    status: str  # "witnessed" | "inconclusive"
    K: list
    radius: int
    covered_radius: int


def finitely_covers_check(E: GraphExtension, S: InducedSystem, depth: int,
                          words: Sequence | None = None) -> CoverReport:
    """Greedy finite K of induced words with kappa_v(g) = kappa-hat_w(g) on the depth-ball."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    cc = E.cocycle
    levels = vertex_ball_levels(E, depth)
    syms = E.base.alphabet
    pairs = [(v, g) for g, _ in levels for v in syms]
    dist = {g: d for g, d in levels}
    index = {p: i for i, p in enumerate(pairs)}
    cands = [r.u for r in S.words] if words is None else [tuple(w) for w in words]
    covers = []
    for u in cands:
        m = 0
        for g, _ in levels:
            t = cc.act_word(u[:-1], g)
            for v in syms:
                if cc.act(v, g) == t:
                    m |= 1 << index[(v, g)]
        covers.append(m)
    full = (1 << len(pairs)) - 1
    chosen, got = [], 0
    while got != full:
        i = max(range(len(cands)), key=lambda j: (bin(covers[j] & ~got).count("1"), -j),
                default=None)
        if i is None or covers[i] & ~got == 0:
            break
        chosen.append("".join(cands[i]))
        got |= covers[i]
    if got == full:
        return CoverReport("witnessed", chosen, depth, depth)
    bad = [dist[g] for (v, g), i in index.items() if not got >> i & 1]
    return CoverReport("inconclusive", chosen, depth, min(bad) - 1)


# ---------------------------------------------------------------------------------
# modified inducing for Schreier extensions

def _merge_words(w: tuple, u: tuple) -> tuple:
    """Concatenate return words sharing the landing/departure symbol."""
    return w + u[1:]


def _core_vertex(H0: SubgroupAutomaton, word) -> int:
    v = 0
    for x in word:
        v = H0.edges[(v, x)]
    return v


def modified_inducing(E: GraphExtension, S: InducedSystem, targets: Sequence,
                      H0: SubgroupAutomaton, budget: int = 100_000,
                      u: Sequence | None = None) -> InducedSystem:
    """Stopping-time refinement with designated words v_h = w_h u, gamma(v_h) in h H0.

    ``targets`` are free words (or strings like "a", "B", "" for the identity).
    """
    cc = E.cocycle
    if not isinstance(cc, SchreierCocycle):
        raise InducingError("modified inducing needs a Schreier extension")
    if not H0.complete:
        raise InducingError("H0 must be a complete (finite-index) automaton")
    if S.mode != "first-return":
        raise InducingError("start from a first-return system")
    base = E.base
    k = H0.rank
    hs = [parse_word(h, k) if isinstance(h, str) else tuple(h) for h in targets]
    labels = ["".join(h) if isinstance(h, str) else str(h) for h in targets]
    pieces = sorted((r.u for r in S.words), key=lambda w: (len(w), base.indices(w)))
    if not pieces:
        raise InducingError("induced system has no return words")
    u = tuple(u) if u is not None else pieces[0]
    if u not in set(pieces):
        raise InducingError(f"u = {''.join(u)!r} is not a return word")
    by_start: dict = {}
    for p in pieces:
        by_start.setdefault(p[0], []).append(p)

    def gamma_vertex(word):
        return _core_vertex(H0, multiply(*(cc.gamma[s] for s in word)))

    want = {i: _core_vertex(H0, h) for i, h in enumerate(hs)}
    chosen: dict[int, tuple] = {}
    queue = deque(pieces)
    seen = 0
    while queue and len(chosen) < len(hs):
        w = queue.popleft()
        seen += 1
        if seen > budget:
            break
        if w[-1] == u[0]:
            v = _merge_words(w, u)
            cv = gamma_vertex(v[:-1])
            for i in range(len(hs)):
                if i in chosen or want[i] != cv:
                    continue
                if any(x[:len(w)] == w or w[:len(x)] == x for x in chosen.values()):
                    break
                chosen[i] = w
                break
        queue.extend(_merge_words(w, p) for p in by_start.get(w[-1], []))
    missing = [labels[i] for i in range(len(hs)) if i not in chosen]
    if missing:
        raise InducingError(f"budget exhausted; no word found for targets {missing}")
    vs = {i: _merge_words(w, u) for i, w in chosen.items()}
    vset = set(vs.values())
    mu_om = S.mu_omega
    leaves = []
    stack = [p for p in reversed([p for a in S.omega for p in by_start.get(a, [])])]
    while stack:
        w = stack.pop()
        if w in vset or not any(v[:len(w)] == w for v in vset):
            m = cylinder_measure(base, w)
            leaves.append(ReturnWord(w, len(w) - 1, m / mu_om))
            continue
        stack.extend(reversed([_merge_words(w, p) for p in by_start.get(w[-1], [])]))
    total = sum((r.nu for r in leaves), base.zero)
    details = {"u": "".join(u),
               "v": {labels[i]: "".join(v) for i, v in sorted(vs.items())},
               "full_branch": is_full_branch(base, S.omega, leaves)}
    return InducedSystem(base, S.omega, leaves, max(r.eta for r in leaves), base.one - total,
                         "modified", "adequate (construction)", total < MASS_WARNING, details)


def is_full_branch(base: MarkovBase, omega: Sequence, words: Sequence[ReturnWord]) -> bool:
    """Every acting prefix lands on all of Omega that may follow it."""
    om = set(omega)
    lands: dict = {}
    for r in words:
        if r.u[0] not in om or r.u[-1] not in om:
            return False
        lands.setdefault(r.acting, set()).add(r.u[-1])
    for p, got in lands.items():
        last = base.index(p[-1])
        need = {b for b in om if base.admissibility[last][base.index(b)]}
        if got != need:
            return False
    return True
