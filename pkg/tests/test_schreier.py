import itertools
import random

import pytest
from hypothesis import given, strategies as st

from amenwalk.extension import vertex_ball
from amenwalk.scenarios import s3_stabilizer_automaton, schreier_extension, subgroup
from amenwalk.schreier import (WordError, automaton_from_permutations, check_tt_ul_fc, contains,
                               inverse_word, multiply, normal_core, parse_word, reduce_word,
                               schreier_generators, stallings_fold, word_to_str)
from amenwalk.symdyn import MarkovBase
from oracles import free_reduce, in_subgroup_brute

FIXTURES = {"<a>": ["a"], "<a2,b>": ["aa", "b"], "<a2,b2,ab>": ["aa", "bb", "ab"]}
BASE = MarkovBase.uniform(["a", "A", "b", "B"])
GAMMA = {s: s for s in "aAbB"}


def test_parse_word_examples():
    assert parse_word("abA", 2) == (1, 2, -1)
    assert parse_word("aA", 2) == ()
    with pytest.raises(WordError):
        parse_word("c", 2)
    assert word_to_str(multiply(parse_word("ab", 2), inverse_word(parse_word("ab", 2)))) == ""


def test_fold_examples():
    M = subgroup("a")
    assert M.n_states == 1 and M.edges == {(0, 1): 0, (0, -1): 0}
    M = subgroup("aa,b")
    assert M.n_states == 2 and M.positive_edges() == [(0, "a", 1), (0, "b", 0), (1, "a", 0)]
    M = subgroup("aa,bb,ab")
    assert M.complete and M.index == 2
    assert all(M.step(v, x) == 1 - v for v in (0, 1) for x in (1, 2))
    assert M.to_json() == {"states": 2, "base": 0, "complete": True, "index": 2,
                           "edges": [[0, "a", 1], [0, "b", 1], [1, "a", 0], [1, "b", 0]]}


def test_contains_examples():
    M = subgroup("aa,b")
    assert contains(M, parse_word("aab", 2)) and not contains(M, parse_word("a", 2))
    assert contains(M, ())
    assert not contains(subgroup("a"), parse_word("baB", 2))


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_membership_matches_brute_force(name):
    gens = [parse_word(g, 2) for g in FIXTURES[name]]
    M = stallings_fold(gens, 2)
    members = in_subgroup_brute(gens, 8)
    # every product of at most 8 generators is accepted
    assert all(contains(M, w) for w in members)
    words = [()]
    for n in range(1, 9):
        words += [w for w in itertools.product((1, -1, 2, -2), repeat=n) if free_reduce(w) == w]
    for w in words:
        if name == "<a2,b2,ab>":
            # the index-2 kernel is exactly the even-length words
            assert contains(M, w) == (len(w) % 2 == 0), word_to_str(w)
        else:
            # each generator here adds at most one letter, so short members are short products
            assert contains(M, w) == (w in members), word_to_str(w)


@pytest.mark.parametrize("gens", [["aa", "bb", "ab"], ["abA", "bba", "aBab"], ["aab", "bAb"]])
def test_fold_confluence(gens):
    words = [parse_word(g, 2) for g in gens]
    ref = stallings_fold(words, 2).to_json()
    for seed in range(100):
        rng = random.Random(seed)
        ws = [w if rng.random() < 0.5 else inverse_word(w) for w in words]
        rng.shuffle(ws)
        assert stallings_fold(ws, 2).to_json() == ref


def test_normal_core_examples():
    idx2 = subgroup("aa,bb,ab")
    assert normal_core(idx2).to_json() == idx2.to_json()
    S3 = s3_stabilizer_automaton()
    assert S3.index == 3 and normal_core(S3).n_states == 6
    assert normal_core(subgroup("a,b")).n_states == 1
    with pytest.raises(ValueError, match="infinite index"):
        normal_core(subgroup("a"))


def test_permutation_automaton_matches_generators():
    S3 = s3_stabilizer_automaton()
    refolded = stallings_fold(schreier_generators(S3), 2)
    assert refolded.to_json() == S3.to_json()
    assert automaton_from_permutations([[0, 1], [0, 1]], 0).index == 1


def test_schreier_vertices():
    E = schreier_extension(subgroup("aa,bb,ab"))
    assert len(vertex_ball(E, 6)) == 2
    assert len(vertex_ball(schreier_extension(subgroup("a")), 1)) == 3
    assert vertex_ball(schreier_extension(subgroup("a,b")), 4) == [E.root]


def test_conditions_examples():
    r = check_tt_ul_fc(subgroup("a,b"), BASE, GAMMA, 3)
    assert all(r[c].status == "witnessed" for c in ("tt", "ul", "fc"))
    r = check_tt_ul_fc(subgroup("aa,bb,ab"), BASE, GAMMA, 3, power=2)
    assert r["ul"].status == "witnessed" and r["ul"].witness == ["aa"]
    r = check_tt_ul_fc(subgroup("a"), BASE, GAMMA, 6)
    assert r["ul"].status == "inconclusive" and r["ul"].depth == 6
    assert check_tt_ul_fc(subgroup("a"), BASE, GAMMA, 6, power=2)["ul"].status == "witnessed"


@given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=20))
def test_reduce_is_idempotent_and_inverse_cancels(w):
    r = reduce_word(w)
    assert reduce_word(r) == r
    assert multiply(r, inverse_word(r)) == ()
