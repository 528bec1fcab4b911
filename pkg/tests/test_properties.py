"""Invariants of the exact walk distributions checked over random inputs."""
from fractions import Fraction as F

from hypothesis import given, settings, strategies as st

from amenwalk.extension import vertex_ball
from amenwalk.scenarios import SCENARIOS, index_two, s3_stabilizer, z_line
from amenwalk.walkdp import markov_operator_apply, return_prob, step_distribution

SMALL = ["Z", "Z2", "F2", "<a>", "index-2", "S3-stabilizer"]


@settings(max_examples=20)
@given(st.sampled_from(SMALL), st.integers(0, 6))
def test_mass_is_conserved(name, n):
    assert step_distribution(SCENARIOS[name](), n).total() == 1


@settings(max_examples=20)
@given(st.integers(0, 12), st.integers(-5, 5))
def test_support_within_n_steps(n, start):
    d = step_distribution(z_line(), n, (start,)).marginal()
    assert all(abs(v[0] - start) <= n and (v[0] - start - n) % 2 == 0 for v in d)


@settings(max_examples=15)
@given(st.sampled_from(["Z", "F2", "<a>", "S3-stabilizer"]), st.integers(1, 6),
       st.integers(1, 6))
def test_returns_are_supermultiplicative(name, n, m):
    E = SCENARIOS[name]()
    assert return_prob(E, n + m) >= return_prob(E, n) * return_prob(E, m)


@settings(max_examples=15)
@given(st.sampled_from([index_two, s3_stabilizer]), st.integers(0, 5),
       st.fractions(-3, 3, max_denominator=7))
def test_markov_operator_fixes_constants_on_finite_graphs(make, n, c):
    E = make()
    V = vertex_ball(E, 4)
    out = markov_operator_apply(E, {v: c for v in V}, n)
    assert all(out(v) == c for v in V)


@settings(max_examples=15)
@given(st.dictionaries(st.integers(-4, 4), st.fractions(-2, 2, max_denominator=5),
                       max_size=5), st.integers(0, 4))
def test_markov_operator_is_linear_and_positive(values, n):
    Z = z_line()
    f = {(k,): x for k, x in values.items()}
    pos = {v: abs(x) for v, x in f.items()}
    Tf, Tpos = markov_operator_apply(Z, f, n), markov_operator_apply(Z, pos, n)
    Tsum = markov_operator_apply(Z, {v: f[v] + pos[v] for v in f}, n)
    assert all(Tsum(v) == Tf(v) + Tpos(v) for v in set(Tsum.values) | set(Tf.values))
    assert all(x >= 0 for x in Tpos.values.values())
    assert sum(Tpos.values.values(), F(0)) == sum(pos.values(), F(0))
