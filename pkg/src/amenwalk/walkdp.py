"""Return probabilities, the fiber-averaged Markov operator and rate estimates.

All exact computations run on arrays of integer vertex codes (see
:class:`amenwalk.extension.Cocycle`).  A distribution is a sorted key array
plus an integer numerator array over a common power-of-denominator scale, so
rational mode never builds a Fraction per state.  States are keyed by
``vertex_code * K + symbol`` where ``symbol`` is the next symbol to be
consumed; Bernoulli bases are memoryless and use ``K = 1``.

Return probabilities are computed meet-in-the-middle: with forward masses
F_j and backward hitting weights B_b, ``p_{j+b} = <F_j, B_b>``, so n steps
only ever need balls of radius about n/2.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .extension import INT64_SAFE, GraphExtension, almost_invariance_defect, inverse_pairing
from .symdyn import lcm_denominator

__all__ = [
    "BudgetError", "ConvergenceError", "DPState", "FiberFunction", "LemmaReport", "MCResult",
    "PressureReport", "RateReport", "ReturnTable", "SpectralReport", "WalkEngine",
    "almost_invariance_defect", "decay_rate", "gurevich_pressure", "lemma_inequality_checks",
    "markov_operator_apply", "mc_return_prob", "mc_return_table", "radial_oracle",
    "rate_report", "return_prob", "return_table", "spectral_radius", "state_budget",
    "step_distribution", "transition_table",
]

DEFAULT_BUDGET = 50_000_000
CHUNK = 1 << 20  # fixed work unit, so merge order never depends on the thread count
MC_SHARD = 1 << 16
DENSE_LIMIT = 200


class BudgetError(RuntimeError):
    """The exact DP would exceed the state budget."""


class ConvergenceError(RuntimeError):
    pass


def state_budget(budget: int | None = None) -> int:
    if budget is not None:
        return int(budget)
    env = os.environ.get("AMENWALK_MEM_BUDGET")
    return int(float(env)) if env else DEFAULT_BUDGET


def _flog(x) -> float:
    """log of a positive Fraction/int/float without float overflow."""
    if isinstance(x, Fraction):
        return math.log(x.numerator) - math.log(x.denominator)
    return math.log(x)


# ---------------------------------------------------------------------------------
# engine

class _Weights:
    """Symbol weights as integer numerators over a common denominator (or floats)."""

    def __init__(self, base, exact: bool):
        A = base.size
        self.collapsed = base.kind == "bernoulli"
        pi = list(base.pi)
        P = [[base.transition(a, b) for b in range(A)] for a in range(A)]
        if exact:
            pi = [Fraction(x) for x in pi]
            P = [[Fraction(q) for q in row] for row in P]
            self.Dpi = lcm_denominator(pi)
            self.DP = lcm_denominator(q for row in P for q in row)
            self.pi = [int(x * self.Dpi) for x in pi]
            self.P = [[int(q * self.DP) for q in row] for row in P]
        else:
            self.Dpi = self.DP = 1
            self.pi = [float(x) for x in pi]
            self.P = [[float(q) for q in row] for row in P]


@dataclass
class _Dist:
    keys: np.ndarray
    mass: np.ndarray
    scale: int  # value = mass / scale (1 in float mode)
    depth: int  # code-steps used so far, for int64 overflow control

    def __len__(self):
        return len(self.keys)


class WalkEngine:
    """Vectorized forward/backward DP over (vertex, next-symbol) states."""

    def __init__(self, E: GraphExtension, exact: bool | None = None,
                 budget: int | None = None, threads: int = 1, markov_form: bool = False):
        self.E = E
        self.cc = E.cocycle
        self.exact = E.base.exact if exact is None else bool(exact)
        self.A = E.base.size
        self.w = _Weights(E.base, self.exact)
        if markov_form:
            # keep the next symbol even for Bernoulli bases (needed when inducing)
            self.w.collapsed = False
        self.K = 1 if self.w.collapsed else self.A
        self.budget = state_budget(budget)
        self.threads = max(1, int(threads))

    # construction -------------------------------------------------------------------

    def _new(self, codes: Sequence[int], mass: Sequence, scale: int, depth: int) -> _Dist:
        keys = np.array(codes, dtype=np.int64)
        if self.exact:
            big = any(abs(int(m)) >= INT64_SAFE for m in mass) or scale >= INT64_SAFE
            m = np.array([int(x) for x in mass], dtype=object if big else np.int64)
        else:
            m = np.array([float(x) for x in mass], dtype=np.float64)
        order = np.argsort(keys, kind="stable")
        return _Dist(keys[order], m[order], scale if self.exact else 1, depth)

    def _omega(self, omega) -> list[int]:
        if omega is None:
            return list(range(self.A))
        return sorted({self.E.base.index(s) if isinstance(s, str) else int(s) for s in omega})

    def forward_init(self, v, omega=None, unit: bool = False) -> _Dist:
        """All mass at v; Markov states carry pi (or 1 with ``unit``) per allowed symbol."""
        code = self.cc.encode(v)
        depth = self.cc.code_depth(v)
        if self.w.collapsed:
            return self._new([code], [1], 1, depth)
        syms = self._omega(omega)
        if unit:
            return self._new([code * self.A + c for c in syms], [1] * len(syms), 1, depth)
        return self._new([code * self.A + c for c in syms], [self.w.pi[c] for c in syms],
                         self.w.Dpi, depth)

    def backward_init(self, t, omega=None) -> _Dist:
        code = self.cc.encode(t)
        depth = self.cc.code_depth(t)
        if self.w.collapsed:
            return self._new([code], [1], 1, depth)
        syms = self._omega(omega)
        return self._new([code * self.A + c for c in syms], [1] * len(syms), 1, depth)

    def from_function(self, f: dict) -> _Dist:
        """Forward state carrying f(g) at g (times pi for Markov bases)."""
        items = sorted(((self.cc.encode(g), x) for g, x in f.items() if x), key=lambda t: t[0])
        depth = max([self.cc.code_depth(g) for g in f] or [0])
        if self.exact:
            vals = [Fraction(x) for _, x in items]
            L = lcm_denominator(vals)
            ints = [int(x * L) for x in vals]
        else:
            L, ints = 1, [float(x) for _, x in items]
        codes = [c for c, _ in items]
        if self.w.collapsed:
            return self._new(codes, ints, L, depth)
        keys, mass = [], []
        for c, m in zip(codes, ints):
            for s in range(self.A):
                keys.append(c * self.A + s)
                mass.append(m * self.w.pi[s])
        return self._new(keys, mass, L * self.w.Dpi, depth)

    # stepping -----------------------------------------------------------------------

    def _prepare(self, d: _Dist, factor: int) -> _Dist:
        mass, keys = d.mass, d.keys
        if self.exact and mass.dtype != object and d.scale * factor >= INT64_SAFE:
            mass = mass.astype(object)
        if keys.dtype != object and d.depth + 1 > self.cc.max_code_steps:
            keys = keys.astype(object)
        if len(keys) > self.budget:
            raise BudgetError(_budget_msg(len(keys), self.budget))
        return _Dist(keys, mass, d.scale, d.depth)

    def _run(self, fn, n: int, syms: Sequence[int]) -> list:
        tasks = [(lo, min(lo + CHUNK, n), s) for lo in range(0, n, CHUNK) for s in syms]
        if self.threads > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                return list(ex.map(fn, tasks))
        return [fn(t) for t in tasks]

    def _merge(self, parts: list, scale: int, depth: int, dtype) -> _Dist:
        ks = [k for k, _ in parts if len(k)]
        ms = [m for k, m in parts if len(k)]
        if not ks:
            return _Dist(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=dtype), scale, depth)
        total = sum(len(k) for k in ks)
        if total > 2 * self.budget:
            # refuse before the unmerged candidates exhaust memory
            raise BudgetError(_budget_msg(total, self.budget))
        keys = np.concatenate(ks)
        mass = np.concatenate(ms)
        order = np.argsort(keys, kind="stable")
        keys, mass = keys[order], mass[order]
        starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
        keys, mass = keys[starts], np.add.reduceat(mass, starts)
        keep = mass != 0
        if not keep.all():
            keys, mass = keys[keep], mass[keep]
        if len(keys) > self.budget:
            raise BudgetError(_budget_msg(len(keys), self.budget))
        return _Dist(keys, mass, scale, depth)

    def step_forward(self, d: _Dist, symbols: Sequence[int] | None = None) -> _Dist:
        """One application of the push-forward; ``symbols`` restricts the consumed symbol."""
        w, A, cc = self.w, self.A, self.cc
        syms = list(range(A)) if symbols is None else list(symbols)
        if w.collapsed:
            d = self._prepare(d, w.Dpi)

            def fn(t):
                lo, hi, a = t
                return cc.act_codes(a, d.keys[lo:hi]), d.mass[lo:hi] * w.pi[a]

            return self._merge(self._run(fn, len(d), syms), d.scale * w.Dpi, d.depth + 1,
                               d.mass.dtype)
        d = self._prepare(d, w.DP)
        verts, cur = d.keys // A, d.keys % A

        def fn(t):
            lo, hi, c = t
            sel = cur[lo:hi] == c
            g = cc.act_codes(c, verts[lo:hi][sel]) * A
            m = d.mass[lo:hi][sel]
            nxt = [b for b in range(A) if w.P[c][b]]
            if not len(m) or not nxt:
                return g[:0], m[:0]
            return (np.concatenate([g + b for b in nxt]),
                    np.concatenate([m * w.P[c][b] for b in nxt]))

        return self._merge(self._run(fn, len(d), syms), d.scale * w.DP, d.depth + 1,
                           d.mass.dtype)

    def step_backward(self, d: _Dist) -> _Dist:
        """B_{b+1}(c, h) = sum_c' P(c, c') B_b(c', kappa_c h)."""
        w, A, cc = self.w, self.A, self.cc
        if w.collapsed:
            d = self._prepare(d, w.Dpi)

            def fn(t):
                lo, hi, a = t
                return cc.act_inverse_codes(a, d.keys[lo:hi]), d.mass[lo:hi] * w.pi[a]

            return self._merge(self._run(fn, len(d), range(A)), d.scale * w.Dpi, d.depth + 1,
                               d.mass.dtype)
        d = self._prepare(d, w.DP)
        verts, cur = d.keys // A, d.keys % A

        def fn(t):
            lo, hi, c2 = t
            sel = cur[lo:hi] == c2
            h = verts[lo:hi][sel]
            m = d.mass[lo:hi][sel]
            prev = [c for c in range(A) if w.P[c][c2]]
            if not len(m) or not prev:
                return h[:0], m[:0]
            return (np.concatenate([cc.act_inverse_codes(c, h) * A + c for c in prev]),
                    np.concatenate([m * w.P[c][c2] for c in prev]))

        return self._merge(self._run(fn, len(d), range(A)), d.scale * w.DP, d.depth + 1,
                           d.mass.dtype)

    # reading off --------------------------------------------------------------------

    def inner(self, F: _Dist, B: _Dist):
        _, i, j = np.intersect1d(F.keys, B.keys, assume_unique=True, return_indices=True)
        if not self.exact:
            return float(np.dot(F.mass[i], B.mass[j]))
        scale = F.scale * B.scale
        if F.mass.dtype != object and B.mass.dtype != object and scale < INT64_SAFE:
            # every partial sum is bounded by the product of the scales
            tot = int(np.dot(F.mass[i], B.mass[j]))
        else:
            tot = sum((int(a) * int(b) for a, b in zip(F.mass[i], B.mass[j])), 0)
        return Fraction(tot, scale)

    def value(self, d: _Dist, m):
        return Fraction(int(m), d.scale) if self.exact else float(m)

    def decode(self, d: _Dist) -> dict:
        """{(symbol or None, vertex): mass}."""
        out = {}
        syms = self.E.base.alphabet
        for k, m in zip(d.keys.tolist(), d.mass.tolist()):
            if self.w.collapsed:
                out[(None, self.cc.decode(k))] = self.value(d, m)
            else:
                out[(syms[k % self.A], self.cc.decode(k // self.A))] = self.value(d, m)
        return out

    def marginal(self, d: _Dist) -> dict:
        if self.w.collapsed:
            return {self.cc.decode(k): self.value(d, m)
                    for k, m in zip(d.keys.tolist(), d.mass.tolist())}
        verts = d.keys // self.A
        starts = np.flatnonzero(np.r_[True, verts[1:] != verts[:-1]]) if len(verts) else []
        if not len(starts):
            return {}
        sums = np.add.reduceat(d.mass, starts)
        return {self.cc.decode(v): self.value(d, m)
                for v, m in zip(verts[starts].tolist(), sums.tolist()) if m}

    def returns(self, n_max: int, start=None, target=None, omega=None,
                unit: bool = False) -> Iterator:
        """Yield p_0, p_1, ..., p_{n_max} (meet-in-the-middle).

        With ``omega`` the walk must start and end with its next symbol in
        omega.  ``unit`` drops the pi weight of the first symbol (cyclic
        weights for periodic-orbit sums).
        """
        E = self.E
        start = E.root if start is None else start
        target = E.root if target is None else target
        same = start == target
        syms = self._omega(omega) if omega is not None else None
        factor = 1
        if self.w.collapsed and syms is not None:
            if unit:
                raise ValueError("unit weights only apply to Markov bases")
            mu = sum((E.base.pi[a] for a in syms), E.base.zero)
            mu = Fraction(mu) if self.exact else float(mu)
            yield mu if same else mu * 0
            factor = mu  # next symbol after n steps is independent of the past
            F = self.forward_init(start)
            B = self.backward_init(target)
        else:
            F = self.forward_init(start, omega, unit)
            B = self.backward_init(target, omega)
            yield self.inner(F, B)
        j = 0
        while 2 * j < n_max:
            j += 1
            first = syms if (self.w.collapsed and syms is not None and j == 1) else None
            F = self.step_forward(F, first)
            yield self.inner(F, B) * factor
            if 2 * j <= n_max:
                B = self.step_backward(B)
                yield self.inner(F, B) * factor


def _budget_msg(n, budget):
    return (f"exact DP needs {n} states, over the budget of {budget}; "
            "use Monte Carlo (mc-walk) or raise the budget")


# ---------------------------------------------------------------------------------
# distributions and the operator T_n

@dataclass
class DPState:
    """Step-n distribution keyed by (next symbol, vertex); symbol is None for Bernoulli."""

    n: int
    mass: dict
    exact: bool = True

    def marginal(self) -> dict:
        out: dict = {}
        for (_, v), m in self.mass.items():
            out[v] = out.get(v, 0) + m
        return out

    def total(self):
        return sum(self.mass.values(), Fraction(0) if self.exact else 0.0)


def step_distribution(E: GraphExtension, n: int, o=None, exact: bool | None = None,
                      budget: int | None = None, threads: int = 1) -> DPState:
    if n < 0:
        raise ValueError("n must be >= 0")
    eng = WalkEngine(E, exact, budget, threads)
    d = eng.forward_init(E.root if o is None else o)
    for _ in range(n):
        d = eng.step_forward(d)
    return DPState(n, eng.decode(d), eng.exact)


def transition_table(E: GraphExtension, v, horizon: int, exact: bool | None = None,
                     budget: int | None = None, targets=None) -> list[dict]:
    """[mu{kappa^n_x(v) = w} as {w: mass} for n = 0..horizon].

    With ``targets`` only those vertices are reported, which avoids decoding
    the whole distribution.
    """
    eng = WalkEngine(E, exact, budget)
    d = eng.forward_init(v)
    want = None
    if targets is not None:
        want = np.array(sorted({eng.cc.encode(w) for w in targets}), dtype=object)

    def marginal(d):
        if want is None:
            return eng.marginal(d)
        verts = d.keys if eng.w.collapsed else d.keys // eng.A
        keep = np.isin(verts.astype(object), want)
        return eng.marginal(_Dist(d.keys[keep], d.mass[keep], d.scale, d.depth))

    out = [marginal(d)]
    for _ in range(horizon):
        d = eng.step_forward(d)
        out.append(marginal(d))
    return out


@dataclass
class FiberFunction:
    """Finitely supported function on the vertices (a fiber-constant function on X x V)."""

    values: dict

    def __post_init__(self):
        self.values = {v: x for v, x in self.values.items() if x}

    def __call__(self, v):
        return self.values.get(v, 0)

    @property
    def norm(self) -> float:
        return math.sqrt(math.fsum(float(x) ** 2 for x in self.values.values()))

    @property
    def norm_sq(self):
        return sum((x * x for x in self.values.values()), 0)


def markov_operator_apply(E: GraphExtension, f: FiberFunction | dict, n: int,
                          exact: bool | None = None, budget: int | None = None,
                          threads: int = 1) -> FiberFunction:
    """(T_n f)(v) = sum over words w of length n of mu([w]) f(kappa_w^{-1} v)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    values = f.values if isinstance(f, FiberFunction) else dict(f)
    if n == 0:
        return FiberFunction(dict(values))
    eng = WalkEngine(E, exact, budget, threads)
    d = eng.from_function(values)
    for _ in range(n):
        d = eng.step_forward(d)
    return FiberFunction(eng.marginal(d))


# ---------------------------------------------------------------------------------
# return probabilities

def radial_oracle(k: int, n_max: int) -> list[Fraction]:
    """p_n for the simple random walk on F_k via its distance-from-identity chain."""
    if k < 2:
        raise ValueError("rank must be >= 2")
    up, D = 2 * k - 1, 2 * k
    # numerators over D**n; v[d] = paths at distance d
    v = [1]
    out = [Fraction(1)]
    for n in range(1, n_max + 1):
        w = [0] * (len(v) + 1)
        for d, x in enumerate(v):
            if not x:
                continue
            if d == 0:
                w[1] += D * x
            else:
                w[d + 1] += up * x
                w[d - 1] += x
        v = w
        out.append(Fraction(v[0], D ** n))
    return out


def return_prob(E: GraphExtension, n: int, o=None, exact: bool | None = None,
                budget: int | None = None, threads: int = 1):
    if n < 1:
        raise ValueError("n must be >= 1")
    *_, p = WalkEngine(E, exact, budget, threads).returns(n, o, o)
    return p


@dataclass
class ReturnTable:
    p: list
    method: list  # per n: "exact-dp" | "float-dp" | "monte-carlo" | "oracle"
    stderr: list

    def rows(self):
        for n, (p, m, s) in enumerate(zip(self.p, self.method, self.stderr)):
            yield {"n": n, "p_n": p, "method": m, "stderr": s}


def return_table(E: GraphExtension, n_max: int, o=None, exact: bool | None = None,
                 budget: int | None = None, threads: int = 1, omega=None,
                 mc_samples: int = 100_000, seed: int = 0) -> ReturnTable:
    """p_0..p_{n_max}: exact DP while within budget, Monte Carlo beyond."""
    eng = WalkEngine(E, exact, budget, threads)
    tag = "exact-dp" if eng.exact else "float-dp"
    p, method, stderr = [], [], []
    try:
        for x in eng.returns(n_max, o, o, omega):
            p.append(x)
            method.append(tag)
            stderr.append(0.0)
    except BudgetError:
        counts = _mc_counts(E, n_max, o, mc_samples, seed, omega, threads)
        for n in range(len(p), n_max + 1):
            q = counts[n] / mc_samples
            p.append(q)
            method.append("monte-carlo")
            stderr.append(math.sqrt(q * (1 - q) / mc_samples))
    return ReturnTable(p, method, stderr)


# ---------------------------------------------------------------------------------
# rate estimators

@dataclass
class RateReport:
    table: list
    estimators: dict  # root, ratio, fit (None when unavailable)
    estimator: str
    value: float
    ratio_raw: object = None  # p_N / p_{N-2} as stored (exact in rational mode)
    window: tuple = (0, 0)
    residual: float = 0.0
    alpha: float | None = None
    clamped: bool = False
    method: list = field(default_factory=list)
    stderr: list = field(default_factory=list)

    def rows(self):
        for name in ("root", "ratio", "fit"):
            yield {"estimator": name, "value": self.estimators.get(name),
                   "window": f"{self.window[0]}-{self.window[1]}",
                   "residual": self.residual if name == "fit" else 0.0}


def rate_report(table: Sequence, estimator: str = "fit", method=None, stderr=None) -> RateReport:
    """Root, ratio and free-exponent fit estimates of limsup p_n^{1/n}."""
    if estimator not in ("root", "ratio", "fit"):
        raise ValueError(f"unknown estimator {estimator!r}")
    table = list(table)
    pos = [n for n in range(1, len(table)) if table[n] > 0]
    if not pos:
        raise ValueError(f"no returns up to n = {len(table) - 1}; try a larger n_max")
    N = pos[-1]
    est = {"root": math.exp(_flog(table[N]) / N)}
    ratio_raw = None
    pairs = [n for n in pos if n >= 2 and table[n - 2] > 0]
    if pairs:
        n = pairs[-1]
        ratio_raw = table[n] / table[n - 2]
        est["ratio"] = math.sqrt(float(ratio_raw))
    else:
        est["ratio"] = None
    fit, lo, resid, alpha, clamped = _fit(table, pos)
    est["fit"] = fit
    value = est[estimator]
    if value is None:
        raise ValueError(f"estimator {estimator!r} needs more data")
    return RateReport(table, est, estimator, value, ratio_raw, (lo, N), resid, alpha, clamped,
                      list(method or []), list(stderr or []))


def _fit(table, pos):
    N = pos[-1]
    lo = N // 2
    ns = [n for n in pos if n >= lo and n % 2 == 0] or [n for n in pos if n >= lo]
    y = np.array([_flog(table[n]) for n in ns])
    x = np.array(ns, dtype=float)
    if len(ns) >= 3:
        X = np.column_stack([np.ones_like(x), x, np.log(x)])
    elif len(ns) == 2:
        X = np.column_stack([np.ones_like(x), x])
    else:
        return math.exp(y[0] / x[0]), lo, 0.0, None, False
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    alpha = float(-coef[2]) if len(coef) == 3 else None
    rho = math.exp(coef[1])
    # a decay rate never exceeds one; a fit above it is finite-window noise
    if rho > 1.0:
        return 1.0, lo, resid, alpha, True
    return rho, lo, resid, alpha, False


def decay_rate(E: GraphExtension | None = None, o=None, n_max: int = 28,
               estimator: str = "fit", table: Sequence | None = None,
               exact: bool | None = None, budget: int | None = None, threads: int = 1,
               mc_samples: int = 100_000, seed: int = 0, omega=None) -> RateReport:
    """R(T, o) estimates; ``table`` (e.g. an oracle) replaces the DP when given."""
    if table is not None:
        return rate_report(table, estimator, ["oracle"] * len(table), [0.0] * len(table))
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    t = return_table(E, n_max, o, exact, budget, threads, omega, mc_samples, seed)
    return rate_report(t.p, estimator, t.method, t.stderr)


# ---------------------------------------------------------------------------------
# spectral radius

@dataclass
class SpectralReport:
    rho_hat: object
    method: str  # "finite-closed" | "self-adjoint" | "growth"
    radii: list
    estimates: list
    iterations: list
    residuals: list
    ball_sizes: list
    bias: str

    def rows(self):
        for r, e, it, res in zip(self.radii, self.estimates, self.iterations, self.residuals):
            yield {"support_radius": r, "rho_hat": e, "iterations": it, "residual": res}


def _code_ball(eng: WalkEngine, center, radius: int):
    """Sorted codes of the undirected ball and their distances."""
    cc = eng.cc
    code = np.array([cc.encode(center)], dtype=np.int64)
    depth = cc.code_depth(center)
    levels = [code]
    seen = code
    for r in range(1, radius + 1):
        f = levels[-1]
        if f.dtype != object and depth + r > cc.max_code_steps:
            f = f.astype(object)
            seen = seen.astype(object)
        nb = np.unique(np.concatenate([cc.act_codes(a, f) for a in range(eng.A)]
                                      + [cc.act_inverse_codes(a, f) for a in range(eng.A)]))
        new = np.setdiff1d(nb, seen, assume_unique=True)
        if not len(new):
            break
        seen = np.union1d(seen, new)
        levels.append(new)
        if len(seen) > eng.budget:
            raise BudgetError(_budget_msg(len(seen), eng.budget))
    codes = np.concatenate(levels)
    dist = np.concatenate([np.full(len(l), i) for i, l in enumerate(levels)])
    order = np.argsort(codes, kind="stable")
    return codes[order], dist[order]


def spectral_radius(E: GraphExtension, o=None, n_max: int = 16, support_radius: int = 8,
                    radii: Sequence[int] | None = None, tol: float = 1e-10,
                    max_iter: int = 100_000, budget: int | None = None,
                    threads: int = 1) -> SpectralReport:
    """Estimate rho(T-hat) = lim ||T_n||^{1/n} on truncated balls.

    For symmetric Bernoulli steps T_1 is self-adjoint and rho-hat is the top
    singular value of T_1 restricted to the ball, which increases with the
    radius (a lower bound).  Otherwise the growth of ||T_n 1_K|| is used.
    """
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    if support_radius < 1:
        raise ValueError("support_radius must be >= 1")
    o = E.root if o is None else o
    if radii is not None:
        support_radius = max(radii)
    eng = WalkEngine(E, False, budget, threads)
    V, dist = _code_ball(eng, o, support_radius)
    n = len(V)
    idx, valid = [], []
    for a in range(eng.A):
        t = eng.cc.act_codes(a, V)
        i = np.searchsorted(V, t)
        ok = i < n
        ok[ok] = V[i[ok]] == t[ok]
        idx.append(np.where(ok, i, 0))
        valid.append(ok)
    if all(v.all() for v in valid):
        # finite closed graph: T_n 1 = 1 and ||T_n|| <= 1
        one = Fraction(1) if E.base.exact else 1.0
        return SpectralReport(one, "finite-closed", [int(dist.max())], [one], [0], [0.0], [n],
                              "exact")
    if radii is None:
        radii = sorted({max(1, support_radius // 4), max(1, support_radius // 2),
                        max(1, 3 * support_radius // 4), support_radius})
    if E.base.kind != "bernoulli" or inverse_pairing(E) is None:
        return _growth_radius(E, eng, V, dist, o, n_max, radii)
    wts = [float(x) for x in E.base.pi]
    est, its, res, sizes = [], [], [], []
    for r in radii:
        sub = np.flatnonzero(dist <= r)
        m = len(sub)
        pos = np.full(n, -1, dtype=np.int64)
        pos[sub] = np.arange(m)
        maps = []
        for a in range(eng.A):
            t = idx[a][sub]
            ok = valid[a][sub] & (pos[t] >= 0)
            maps.append((np.flatnonzero(ok).astype(np.int32), pos[t[ok]].astype(np.int32), wts[a]))
        lam, it, resid = _top_gram_eigen(maps, m, tol, max_iter)
        est.append(math.sqrt(max(lam, 0.0)))
        its.append(it)
        res.append(resid)
        sizes.append(m)
    return SpectralReport(est[-1], "self-adjoint", list(radii), est, its, res, sizes,
                          "lower-bound (truncation increases with radius)")


def _top_gram_eigen(maps, m, tol, max_iter):
    """Top eigenvalue of M^T M where M moves mass src -> tgt with weight w per symbol."""
    count = [0]

    def mv(x):
        y = np.zeros(m)
        for src, tgt, w in maps:
            y[tgt] += w * x[src]  # each symbol acts injectively
        return y

    def rmv(y):
        z = np.zeros(m)
        for src, tgt, w in maps:
            z[src] += w * y[tgt]
        return z

    def gram(x):
        count[0] += 1
        return rmv(mv(np.asarray(x).ravel()))

    if m <= DENSE_LIMIT:
        M = np.zeros((m, m))
        for src, tgt, w in maps:
            M[tgt, src] += w
        G = M.T @ M
        vals, vecs = np.linalg.eigh(G)
        x = vecs[:, -1]
        return float(vals[-1]), 1, float(np.linalg.norm(G @ x - vals[-1] * x))
    op = LinearOperator((m, m), matvec=gram, dtype=np.float64)
    try:
        vals, vecs = eigsh(op, k=1, which="LA", v0=np.ones(m), tol=tol, maxiter=max_iter,
                           ncv=min(m - 1, 12))
    except ArpackNoConvergence as err:
        raise ConvergenceError(f"power iteration did not converge after {count[0]} products; "
                               f"{len(err.eigenvalues)} eigenvalues settled") from None
    x = vecs[:, 0]
    lam = float(vals[0])
    return lam, count[0], float(np.linalg.norm(gram(x) - lam * x))


def _growth_radius(E, eng, V, dist, o, n_max, radii):
    """(||T_n 1_K|| / ||1_K||)^{1/n} at n = n_max for K the ball of each radius."""
    est, its, res, sizes = [], [], [], []
    for r in radii:
        K = [eng.cc.decode(c) for c in V[dist <= r].tolist()]
        d = eng.from_function({v: 1.0 for v in K})
        for _ in range(n_max):
            d = eng.step_forward(d)
        g = eng.marginal(d)
        ratio = math.sqrt(math.fsum(x * x for x in g.values()) / len(K))
        est.append(min(ratio ** (1.0 / n_max), 1.0))
        its.append(n_max)
        res.append(0.0)
        sizes.append(len(K))
    return SpectralReport(est[-1], "growth", list(radii), est, its, res, sizes,
                          "finite-n growth estimate; bias not quantified")


# ---------------------------------------------------------------------------------
# Gurevich pressure

@dataclass
class PressureReport:
    pressure: float
    log_fit_rate: float
    Z: list
    window: tuple

    def rows(self):
        yield {"pressure": self.pressure, "log_fit_rate": self.log_fit_rate,
               "window": f"{self.window[0]}-{self.window[1]}"}


def gurevich_pressure(E: GraphExtension | None = None, o=None, n_max: int = 200,
                      table: Sequence | None = None, exact: bool | None = None,
                      budget: int | None = None, threads: int = 1) -> PressureReport:
    """Tail growth of the weighted periodic-orbit sums Z_n through o.

    Bernoulli: Z_n is the return probability itself.  Markov: cycles are
    weighted by prod P(w_i, w_{i+1 mod n}) without the stationary factor;
    it differs from mu([w]) by a bounded factor, which does not change the
    exponential growth rate.
    """
    if table is not None:
        Z = list(table)
        p = Z
    else:
        if n_max < 2:
            raise ValueError("n_max must be >= 2")
        if not E.base.full_branch:
            raise ValueError("Gurevich pressure needs a full-branch base")
        eng = WalkEngine(E, exact, budget, threads)
        if E.base.kind == "bernoulli":
            Z = list(eng.returns(n_max, o, o))
            p = Z
        else:
            Z = [sum(col) for col in zip(*(list(eng.returns(n_max, o, o, [a], unit=True))
                                           for a in range(E.base.size)))]
            p = list(eng.returns(n_max, o, o))
    pos = [n for n in range(1, len(Z)) if Z[n] > 0]
    if not pos:
        raise ValueError("no periodic orbits through o in the window; try a larger n_max")
    N = pos[-1]
    earlier = [n for n in pos if n <= N // 2 and (n - N) % 2 == 0] or \
        [n for n in pos if n <= N // 2]
    if earlier:
        M = earlier[-1]
        P = (_flog(Z[N]) - _flog(Z[M])) / (N - M)
    else:
        M = 0
        P = _flog(Z[N]) / N
    fit = rate_report(p, "fit").value
    return PressureReport(P, math.log(fit), Z, (M, N))


# ---------------------------------------------------------------------------------
# Monte Carlo

@dataclass
class MCResult:
    estimate: float
    stderr: float
    samples: int


def _mc_shard(E, n_max, start_code, target_code, size, seed_seq, omega, depth):
    rng = np.random.default_rng(seed_seq)
    base, cc = E.base, E.cocycle
    A = base.size
    pi = np.array([float(x) for x in base.pi])
    cum_pi = np.cumsum(pi)
    cum_P = None
    if base.kind == "markov":
        cum_P = np.cumsum(np.array([[float(q) for q in row] for row in base.P]), axis=1)
    dtype = object if n_max + depth > cc.max_code_steps else np.int64
    codes = np.full(size, start_code, dtype=dtype)
    counts = np.zeros(n_max + 1, dtype=np.int64)
    sym = np.minimum(np.searchsorted(cum_pi, rng.random(size), side="right"), A - 1)
    in_omega = None if omega is None else np.isin(np.arange(A), omega)
    start_ok = np.ones(size, dtype=bool) if omega is None else in_omega[sym]
    for n in range(n_max + 1):
        hit = codes == target_code
        if omega is not None:
            hit &= start_ok & in_omega[sym]
        counts[n] = int(hit.sum())
        if n == n_max:
            break
        for a in range(A):
            sel = sym == a
            if sel.any():
                codes[sel] = cc.act_codes(a, codes[sel])
        u = rng.random(size)
        if cum_P is None:
            sym = np.searchsorted(cum_pi, u, side="right")
        else:
            sym = (u[:, None] >= cum_P[sym]).sum(axis=1)
        sym = np.minimum(sym, A - 1)
    return counts


def _mc_counts(E, n_max, o, samples, seed, omega=None, threads=1) -> np.ndarray:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    o = E.root if o is None else o
    code = E.cocycle.encode(o)
    depth = E.cocycle.code_depth(o)
    om = None
    if omega is not None:
        om = sorted({E.base.index(s) if isinstance(s, str) else int(s) for s in omega})
    shards = -(-samples // MC_SHARD)
    seqs = np.random.SeedSequence(seed).spawn(shards)
    sizes = [min(MC_SHARD, samples - i * MC_SHARD) for i in range(shards)]

    def run(i):
        return _mc_shard(E, n_max, code, code, sizes[i], seqs[i], om, depth)

    if threads > 1 and shards > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, range(shards)))
    else:
        parts = [run(i) for i in range(shards)]
    return np.sum(parts, axis=0)


def mc_return_table(E: GraphExtension, n_max: int, o=None, samples: int = 100_000,
                    seed: int = 0, threads: int = 1, omega=None) -> list[MCResult]:
    counts = _mc_counts(E, n_max, o, samples, seed, omega, threads)
    out = []
    for c in counts.tolist():
        q = c / samples
        out.append(MCResult(q, math.sqrt(q * (1 - q) / samples), samples))
    return out


def mc_return_prob(E: GraphExtension, n: int, o=None, samples: int = 100_000,
                   seed: int = 0, threads: int = 1) -> MCResult:
    """Seeded Monte Carlo estimate of p_n with its binomial standard error."""
    return mc_return_table(E, n, o, samples, seed, threads)[n]


# ---------------------------------------------------------------------------------
# uniform-loop inequalities

@dataclass
class LemmaReport:
    trials: int
    min_slack_normdrop: float
    min_slack_rotundity: float
    max_slack: float
    violations: list
    ok: bool


def _translate(E, f: dict, w) -> dict:
    """f_w = f o kappa_w^{-1}, i.e. the value at g moves to kappa_w(g)."""
    return {E.cocycle.act_word(w, g): x for g, x in f.items()}


def _l2(f: dict) -> float:
    return math.sqrt(math.fsum(x * x for x in f.values()))


def _add(*fs: dict, signs=None) -> dict:
    out: dict = {}
    signs = signs or [1] * len(fs)
    for f, s in zip(fs, signs):
        for g, x in f.items():
            out[g] = out.get(g, 0.0) + s * x
    return out


def lemma_inequality_checks(E: GraphExtension, J: Sequence, trials: int = 1000, seed: int = 0,
                            support_radius: int = 2, max_word: int = 3,
                            tol: float = 1e-10) -> LemmaReport:
    """Random-trial check of the loop norm-drop and rotundity inequalities.

    For unit f: ||f - sum_J f_u|| <= #J - 1, and with eps = ||f - f_w||,
    ||f_w + sum_J f_u|| <= 1 + #J - delta where delta = 2 - sqrt(4 - eps^2).
    """
    from .extension import vertex_ball

    J = [tuple(u) for u in J]
    if not J:
        raise ValueError("J must be nonempty")
    rng = np.random.default_rng(seed)
    ball = vertex_ball(E, support_radius)
    base = E.base
    loops: dict = {}

    def has_loop(h):
        if h not in loops:
            loops[h] = any(E.cocycle.act_word(u, h) == h for u in J)
        return loops[h]

    worst1 = worst2 = math.inf
    best = -math.inf
    violations = []
    for t in range(trials):
        size = int(rng.integers(1, len(ball) + 1))
        pick = rng.choice(len(ball), size=size, replace=False)
        vals = rng.standard_normal(size)
        vals /= np.linalg.norm(vals)
        f = {ball[i]: float(x) for i, x in zip(pick, vals)}
        fus = [_translate(E, f, u) for u in J]
        region = set(f).union(*fus)
        if not all(has_loop(h) for h in region):
            raise ValueError("J does not give every vertex of the sampled support a loop")
        s1 = (len(J) - 1) - _l2(_add(f, *fus, signs=[1] + [-1] * len(J)))
        # a random admissible word for the rotundity bound
        L = int(rng.integers(1, max_word + 1))
        w = [int(rng.integers(base.size))]
        while len(w) < L:
            nxt = [b for b in range(base.size) if base.admissibility[w[-1]][b]]
            w.append(nxt[int(rng.integers(len(nxt)))])
        w = tuple(base.alphabet[i] for i in w)
        fw = _translate(E, f, w)
        eps = _l2(_add(f, fw, signs=[1, -1]))
        s2 = math.inf
        if eps > 0:
            delta = 2 - math.sqrt(max(0.0, 4 - eps * eps))
            s2 = (1 + len(J) - delta) - _l2(_add(fw, *fus))
        worst1, worst2 = min(worst1, s1), min(worst2, s2)
        best = max(best, s1, s2 if s2 != math.inf else s1)
        if s1 < -tol or s2 < -tol:
            violations.append({"trial": t, "f": f, "w": w, "slack": (s1, s2)})
    return LemmaReport(trials, worst1, worst2, best, violations, not violations)
