"""Independent reference computations used to freeze expected values.

Nothing here imports the package: the walks are enumerated word by word.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb

FREE = {"a": 1, "A": -1, "b": 2, "B": -2}


def free_reduce(word) -> tuple:
    out: list[int] = []
    for x in word:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def f2_return_brute(n: int) -> Fraction:
    """Fraction of the 4^n step sequences that reduce to the identity."""
    hits = sum(1 for w in itertools.product((1, -1, 2, -2), repeat=n) if not free_reduce(w))
    return Fraction(hits, 4 ** n)


def z_return(n: int) -> Fraction:
    return Fraction(comb(n, n // 2), 2 ** n) if n % 2 == 0 else Fraction(0)


def z2_return(n: int) -> Fraction:
    # the rotated coordinates x+y, x-y are two independent simple walks
    return z_return(n) ** 2


def perm_action_returns(perms: dict, start, n: int, weights: dict) -> Fraction:
    """Return probability of a walk driven by explicit permutations (dict maps)."""
    dist = {start: Fraction(1)}
    for _ in range(n):
        nxt: dict = {}
        for v, m in dist.items():
            for s, p in perms.items():
                t = p[v]
                nxt[t] = nxt.get(t, 0) + m * weights[s]
        dist = nxt
    return dist.get(start, Fraction(0))


def in_subgroup_brute(gens: list[tuple], length: int) -> set[tuple]:
    """All reduced words that are products of at most ``length`` generators or inverses."""
    letters = [tuple(g) for g in gens] + [tuple(-x for x in reversed(g)) for g in gens]
    seen = {()}
    frontier = {()}
    for _ in range(length):
        frontier = {free_reduce(w + g) for w in frontier for g in letters} - seen
        seen |= frontier
    return seen


def f2_ball_sizes(r: int) -> tuple[int, int]:
    """(|sphere_r|, |ball_r|) in the 4-regular tree."""
    sphere = 1 if r == 0 else 4 * 3 ** (r - 1)
    ball = 2 * 3 ** r - 1
    return sphere, ball
