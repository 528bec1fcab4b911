import math
from fractions import Fraction as F

import pytest

from amenwalk.extension import GraphExtension, TableCocycle, vertex_ball
from amenwalk.scenarios import (SCENARIOS, free_group, index_two, one_vertex, schreier_extension,
                                subgroup, z_line, z_plane)
from amenwalk.symdyn import MarkovBase
from amenwalk.walkdp import (BudgetError, FiberFunction, decay_rate, gurevich_pressure,
                             lemma_inequality_checks, markov_operator_apply, mc_return_prob,
                             mc_return_table, radial_oracle, rate_report, return_prob,
                             return_table, spectral_radius, step_distribution)
from oracles import f2_return_brute, perm_action_returns, z2_return, z_return

KESTEN = math.sqrt(3) / 2


def test_step_distribution_examples():
    Z = z_line()
    d = step_distribution(Z, 2)
    assert d.marginal() == {(-2,): F(1, 4), (0,): F(1, 2), (2,): F(1, 4)}
    assert d.total() == 1
    d0 = step_distribution(Z, 0, (7,))
    assert d0.marginal() == {(7,): 1}
    T = free_group()
    assert step_distribution(T, 2).marginal()[T.root] == F(1, 4)


def test_return_prob_examples():
    Z = z_line()
    assert return_prob(Z, 2) == F(1, 2) and return_prob(Z, 3) == 0
    assert return_prob(free_group(), 4) == F(7, 64)


def test_return_prob_index_two():
    # <a^2, b, a b a^-1> is the kernel of the parity of a: a swaps, b fixes
    kernel = schreier_extension(subgroup("aa,b,abA"))
    assert return_prob(kernel, 2) == F(1, 2)
    perms = {"a": {0: 1, 1: 0}, "A": {0: 1, 1: 0}, "b": {0: 0, 1: 1}, "B": {0: 0, 1: 1}}
    assert return_prob(kernel, 2) == perm_action_returns(perms, 0, 2, dict.fromkeys(perms, F(1, 4)))
    # in <a^2, b^2, ab> every symbol swaps the two cosets, so two steps always return
    assert return_prob(index_two(), 2) == 1


@pytest.mark.parametrize("n", range(0, 11))
def test_returns_match_brute_force(n):
    T = free_group()
    assert return_prob(T, n) == f2_return_brute(n) if n else return_table(T, 0).p[0] == 1
    assert return_table(z_line(), n).p[n] == z_return(n)
    assert return_table(z_plane(), n).p[n] == z2_return(n)


def test_radial_oracle_examples():
    p = radial_oracle(2, 9)
    assert p[2] == F(1, 4) and p[4] == F(7, 64)
    assert all(p[n] == 0 for n in range(1, 10, 2))
    assert radial_oracle(2, 20) == return_table(free_group(), 20).p


def test_decay_rate_examples():
    rep = decay_rate(table=radial_oracle(2, 1000), estimator="fit")
    assert abs(rep.value - KESTEN) < 1e-3
    # ratio of consecutive even binomial returns is (2n+1)/(2n+2)
    rep = decay_rate(z_line(), n_max=1002, estimator="ratio", exact=True)
    assert rep.ratio_raw == F(1001, 1002)
    assert rep.value == pytest.approx(math.sqrt(1001 / 1002))
    rep = decay_rate(one_vertex(), n_max=12)
    assert all(v == pytest.approx(1) for v in rep.estimators.values())


def test_fit_is_clamped_at_one():
    rep = rate_report([1] * 20, "fit")
    assert rep.value == 1


def test_markov_operator_examples():
    Z = z_line()
    f = FiberFunction({(0,): F(1)})
    assert markov_operator_apply(Z, f, 0).values == f.values
    assert markov_operator_apply(Z, f, 1).values == {(-1,): F(1, 2), (1,): F(1, 2)}
    S3 = SCENARIOS["S3-stabilizer"]()
    ones = {v: F(1) for v in vertex_ball(S3, 3)}
    for n in (1, 2, 5):
        assert markov_operator_apply(S3, ones, n).values == ones


def test_spectral_radius_examples():
    rep = spectral_radius(index_two())
    assert rep.rho_hat == 1 and rep.method == "finite-closed"
    rep = spectral_radius(z_line(), support_radius=400)
    assert rep.rho_hat >= 0.99
    rep = spectral_radius(free_group(), radii=[6, 9, 12])
    # truncations approach the Kesten value from below
    assert rep.estimates == sorted(rep.estimates)
    assert 0.84 < rep.rho_hat < KESTEN


def test_gurevich_examples():
    assert gurevich_pressure(one_vertex(), n_max=20).pressure == pytest.approx(0, abs=1e-12)
    rep = gurevich_pressure(z_line(), n_max=500, exact=False)
    assert abs(rep.pressure) < 0.01
    rep = gurevich_pressure(table=radial_oracle(2, 500))
    assert abs(rep.pressure - math.log(KESTEN)) < 0.01


def test_budget_is_enforced():
    with pytest.raises(BudgetError):
        return_prob(free_group(), 16, budget=1000)
    t = return_table(free_group(), 16, budget=1000, mc_samples=20000, seed=1)
    assert "monte-carlo" in t.method and t.stderr[-1] > 0


def test_lemma_examples():
    # a single identity loop: the bound is 0 and is attained
    rep = lemma_inequality_checks(one_vertex(), [("0",)], trials=50)
    assert rep.ok and rep.min_slack_normdrop == pytest.approx(0, abs=1e-12)
    Z = z_line()
    J = [("+", "-"), ("-", "+")]
    f = {(0,): 1.0}
    shifted = [{Z.cocycle.act_word(u, g): x for g, x in f.items()} for u in J]
    resid = f[(0,)] - sum(s.get((0,), 0) for s in shifted)
    assert abs(resid) <= len(J) - 1
    assert lemma_inequality_checks(Z, J, trials=200, seed=3).ok


def test_lemma_rejects_loopless_witness():
    with pytest.raises(ValueError):
        lemma_inequality_checks(z_line(), [("+",)], trials=5)


def test_monte_carlo_examples():
    r = mc_return_prob(z_line(), 2, samples=10**6, seed=42)
    assert abs(r.estimate - 0.5) <= 3 * r.stderr
    assert mc_return_prob(z_line(), 3, samples=10**4, seed=1).estimate == 0
    exact = float(return_prob(free_group(), 16))
    r = mc_return_prob(free_group(), 16, samples=200_000, seed=7)
    assert abs(r.estimate - exact) <= 3 * r.stderr


def test_monte_carlo_is_thread_independent():
    a = mc_return_table(free_group(), 10, samples=150_000, seed=5, threads=1)
    b = mc_return_table(free_group(), 10, samples=150_000, seed=5, threads=4)
    assert [(r.estimate, r.stderr) for r in a] == [(r.estimate, r.stderr) for r in b]


def test_exact_dp_is_thread_independent():
    a = return_table(free_group(), 18, threads=1).p
    b = return_table(free_group(), 18, threads=4).p
    assert a == b


def test_markov_base_returns():
    # the lazy chain on Z: steps repeat the previous direction with probability 3/4
    base = MarkovBase.markov(["+", "-"], ["1/2", "1/2"], [["3/4", "1/4"], ["1/4", "3/4"]])
    from amenwalk.extension import LatticeCocycle
    E = GraphExtension(base, LatticeCocycle(["+", "-"], [(1,), (-1,)]))
    p = return_table(E, 4).p
    # n=2 returns: "+-" or "-+" with mass 1/2 * 1/4 each
    assert p[2] == F(1, 4)
    assert sum(step_distribution(E, 6).mass.values()) == 1


def test_one_vertex_table():
    E = GraphExtension(MarkovBase.bernoulli(["0", "1"], ["1/3", "2/3"]),
                       TableCocycle(["0", "1"], ["o"], {"0": [0], "1": [0]}))
    assert return_table(E, 6).p == [1] * 7
