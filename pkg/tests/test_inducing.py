import math
from fractions import Fraction as F

import pytest

from amenwalk.inducing import (InducedSystem, InducingError, ReturnWord, finitely_covers_check,
                               first_return_words, induced_rates, is_full_branch, kac_check,
                               modified_inducing, tail_rate)
from amenwalk.scenarios import (free_group, index_two, one_vertex, schreier_extension, subgroup,
                                z_line)
from amenwalk.symdyn import MarkovBase, cylinder_measure

FAIR = MarkovBase.uniform(["0", "1"])


def test_first_return_geometric_law():
    S = first_return_words(FAIR, "[0]", 60)
    assert [r.u for r in S.words] == [("0",) + ("1",) * (k - 1) + ("0",) for k in range(1, 61)]
    assert S.eta_distribution() == {k: F(1, 2 ** k) for k in range(1, 61)}
    assert S.tail == F(1, 2 ** 60)
    assert is_full_branch(FAIR, S.omega, S.words)


def test_first_return_whole_space():
    S = first_return_words(FAIR, ["0", "1"], 5)
    assert sorted(r.u for r in S.words) == [(a, b) for a in "01" for b in "01"]
    assert all(r.eta == 1 for r in S.words) and S.tail == 0


def test_first_return_respects_admissibility():
    base = MarkovBase.markov(["0", "1"], ["1/3", "2/3"], [[0, 1], ["1/2", "1/2"]])
    S = first_return_words(base, ["0"], 30)
    assert min(r.eta for r in S.words) == 2
    # nu is the cylinder mass relative to mu(Omega), never renormalised
    assert all(r.nu == cylinder_measure(base, r.u) / F(1, 3) for r in S.words)


def test_tail_rate_examples():
    rep = tail_rate(first_return_words(FAIR, ["0"], 60))
    assert abs(rep.rate - 0.5) < 0.01 and rep.exponential
    rep = tail_rate(first_return_words(FAIR, ["0", "1"], 5))
    assert rep.rate == 0 and rep.exponential


def test_tail_rate_polynomial_fixture():
    # nu(eta = k) proportional to k^-3, cut at 200 with the rest left as tail
    ks = range(1, 201)
    z = sum(F(1, k ** 3) for k in range(1, 20001))
    words = [ReturnWord(("0",) + ("1",) * (k - 1) + ("0",), k, F(1, k ** 3) / z) for k in ks]
    S = InducedSystem(FAIR, ("0",), words, 200, 1 - sum(r.nu for r in words))
    rep = tail_rate(S)
    assert rep.rate > 0.99 and not rep.exponential
    assert rep.alpha == pytest.approx(3, abs=0.05)


def test_tail_rate_needs_enough_return_times():
    with pytest.raises(InducingError):
        tail_rate(first_return_words(FAIR, ["0"], 5))


def test_kac_examples():
    rep = kac_check(first_return_words(FAIR, ["0"], 60))
    assert rep.target == 2 and rep.defect < 1e-15
    assert kac_check(first_return_words(FAIR, ["0", "1"], 3)).expectation == 1
    third = MarkovBase.bernoulli(["0", "1"], ["1/3", "2/3"])
    rep = kac_check(first_return_words(third, ["0"], 80))
    assert rep.target == 3 and abs(rep.expectation - 3) < 1e-9


def test_induced_rates_examples():
    E = one_vertex()
    # the truncated tail costs 2^-40 per induced step
    r = induced_rates(E, first_return_words(E.base, ["0"], 40), n_max=10)
    assert all(x.value == pytest.approx(1) for x in (r.R_S, r.R_Omega_T, r.R_T))
    Z = z_line()
    # all three true rates are 1; the ratio estimator keeps their finite-n order
    r = induced_rates(Z, first_return_words(Z.base, ["+"], 24), n_max=24, estimator="ratio")
    assert r.chain_holds and r.R_S.value > 0.97
    assert r.R_S.estimators["fit"] > 0.999
    T = free_group()
    r = induced_rates(T, first_return_words(T.base, ["a"], 4), n_max=16, n_induced=8)
    assert r.chain_holds
    assert max(r.R_S.value, r.R_Omega_T.value, r.R_T.value) <= 0.90


def test_finite_cover_examples():
    E = schreier_extension(subgroup("aa,b"))
    S = first_return_words(E.base, ["a", "A", "b", "B"], 3)
    rep = finitely_covers_check(E, S, 4)
    assert rep.status == "witnessed" and rep.K == ["aa", "ba", "Ba", "Aa"]
    rep = finitely_covers_check(E, first_return_words(E.base, ["a"], 6), 4)
    assert rep.status == "witnessed" and rep.K == ["aa", "aAba", "aABa", "aAAa"]
    P = one_vertex()
    rep = finitely_covers_check(P, first_return_words(P.base, ["0"], 4), 2)
    assert rep.status == "witnessed" and len(rep.K) == 1


def test_modified_inducing_index_two():
    E = index_two()
    S = first_return_words(E.base, ["a"], 6)
    M = modified_inducing(E, S, ["a", "b", ""], subgroup("aa,bb,ab"))
    assert M.mode == "modified" and M.details["full_branch"]
    assert M.details["v"] == {"a": "aAaa", "b": "abaa", "": "aaa"}
    assert all(len(v) - 1 <= 4 for v in M.details["v"].values())
    # the leaves partition Omega up to the carried tail
    assert sum(r.nu for r in M.words) + M.tail == 1


def test_modified_inducing_free_group():
    E = schreier_extension(subgroup("a,b"))
    S = first_return_words(E.base, ["a"], 4)
    M = modified_inducing(E, S, ["a", "A", "b", "B", ""], subgroup("a,b"))
    assert M.details["full_branch"]


def test_modified_inducing_needs_finite_index_core():
    E = schreier_extension(subgroup("a"))
    S = first_return_words(E.base, ["a"], 4)
    with pytest.raises(InducingError):
        modified_inducing(E, S, ["a", ""], subgroup("a"))
