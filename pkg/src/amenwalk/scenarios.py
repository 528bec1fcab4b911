"""Ready-made graph extensions used by the CLI, the tests and the acceptance suite."""
from __future__ import annotations

from typing import Callable

from .extension import GraphExtension, LatticeCocycle, TableCocycle
from .schreier import (SubgroupAutomaton, automaton_from_permutations, parse_word,
                       schreier_vertex_generator, stallings_fold)
from .symdyn import MarkovBase

FREE_SYMBOLS = ("a", "A", "b", "B")


def z_line(exact: bool = True) -> GraphExtension:
    """Simple random walk on Z: symbols +, - with weight 1/2."""
    base = MarkovBase.uniform(["+", "-"], exact)
    return GraphExtension(base, LatticeCocycle(["+", "-"], [(1,), (-1,)]), name="Z")


def z_plane(exact: bool = True) -> GraphExtension:
    syms = ["e", "w", "n", "s"]
    base = MarkovBase.uniform(syms, exact)
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    return GraphExtension(base, LatticeCocycle(syms, steps), name="Z2")


def schreier_extension(M: SubgroupAutomaton, name: str = "", exact: bool = True,
                       base: MarkovBase | None = None) -> GraphExtension:
    """Uniform 4-symbol steps a, A, b, B on the coset graph of M (rank 2)."""
    base = base or MarkovBase.uniform(FREE_SYMBOLS, exact)
    return GraphExtension(base, schreier_vertex_generator(M), name=name)


def subgroup(gens: str, k: int = 2) -> SubgroupAutomaton:
    """Fold comma-separated generator words; an empty string gives the trivial subgroup."""
    return stallings_fold([parse_word(g.strip(), k) for g in gens.split(",")], k)


def free_group(exact: bool = True) -> GraphExtension:
    """Cayley tree of F_2: the Schreier graph of the trivial subgroup."""
    return schreier_extension(subgroup(""), "F2", exact)


def cyclic_subgroup(exact: bool = True) -> GraphExtension:
    return schreier_extension(subgroup("a"), "<a>", exact)


def index_two(exact: bool = True) -> GraphExtension:
    return schreier_extension(subgroup("aa,bb,ab"), "index-2", exact)


def s3_stabilizer_automaton() -> SubgroupAutomaton:
    """Stabiliser of a point under a -> (1 2), b -> (1 2 3) in S_3."""
    return automaton_from_permutations([[1, 0, 2], [1, 2, 0]], point=0)


def s3_stabilizer(exact: bool = True) -> GraphExtension:
    return schreier_extension(s3_stabilizer_automaton(), "S3-stabilizer", exact)


def one_vertex(exact: bool = True) -> GraphExtension:
    base = MarkovBase.uniform(["0", "1"], exact)
    return GraphExtension(base, TableCocycle(["0", "1"], ["o"], {"0": [0], "1": [0]}),
                          name="point")


SCENARIOS: dict[str, Callable[..., GraphExtension]] = {
    "Z": z_line,
    "Z2": z_plane,
    "F2": free_group,
    "<a>": cyclic_subgroup,
    "index-2": index_two,
    "S3-stabilizer": s3_stabilizer,
}

# Omega used for the inducing chain on each scenario
OMEGA = {"Z": ["+"], "Z2": ["e"], "F2": ["a"], "<a>": ["a"], "index-2": ["a"],
         "S3-stabilizer": ["a"]}
