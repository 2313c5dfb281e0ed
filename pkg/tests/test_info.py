from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multiphase.info import (
    NOT_APPLICABLE,
    SATISFIED,
    InfoContractError,
    JointTable,
    ZeroMassError,
    bernoulli_divergence_check,
    bernoulli_kl,
    binary_entropy,
    chain_rule_residual,
    condition,
    dumps_table,
    entropy,
    fact_corpus,
    kl,
    kl_mi_identity_residual,
    loads_table,
    marginalize,
    mutual_information,
    planted_table,
    random_table,
    verify_facts,
)

# closed forms evaluated independently with mpmath at 40 digits
H_QUARTER = 0.8112781244591328639
KL_0101_01 = 7.262415634450829e-7


def copy_table() -> JointTable:
    return JointTable(("X", "Y"), np.array([[0.5, 0.0], [0.0, 0.5]]))


def bernoulli(q: float) -> JointTable:
    return JointTable(("X",), np.array([1 - q, q]))


def test_uniform_bit_entropy():
    assert entropy(bernoulli(0.5), "X") == pytest.approx(1.0, abs=1e-12)


def test_copy_conditional_entropy():
    assert entropy(copy_table(), "X", "Y") == pytest.approx(0.0, abs=1e-12)


def test_binary_entropy_quarter():
    assert entropy(bernoulli(0.25), "X") == pytest.approx(H_QUARTER, abs=1e-12)
    assert binary_entropy(0.25) == pytest.approx(H_QUARTER, abs=1e-12)


def test_mutual_information_examples():
    J = JointTable.product(("X", "Y"), [[0.3, 0.7], [0.6, 0.4]])
    assert abs(mutual_information(J, "X", "Y")) <= 1e-9
    assert mutual_information(copy_table(), "X", "Y") == pytest.approx(1.0, abs=1e-12)


def test_overlapping_sets_rejected():
    with pytest.raises(InfoContractError):
        mutual_information(copy_table(), "X", "X")
    with pytest.raises(InfoContractError):
        entropy(copy_table(), "Q")


def test_kl_examples():
    mu = bernoulli(0.2)
    assert kl(mu, mu) == 0.0
    c = 0.3
    assert kl(bernoulli(0.0), bernoulli(c)) == pytest.approx(math.log2(1 / (1 - c)), abs=1e-12)
    v = bernoulli_kl(0.0101, 0.01)
    assert 6e-7 <= v <= 1e-6
    assert v == pytest.approx(KL_0101_01, rel=1e-9)


def test_kl_support_violation_is_infinite():
    assert kl(bernoulli(0.5), bernoulli(0.0)) == math.inf


def test_kl_signature_mismatch():
    with pytest.raises(InfoContractError):
        kl(bernoulli(0.5), copy_table())


def test_table_validation():
    with pytest.raises(InfoContractError):
        JointTable(("X", "X"), np.full((2, 2), 0.25))
    with pytest.raises(InfoContractError):
        JointTable(("X",), np.array([0.5, 0.6]))
    with pytest.raises(InfoContractError):
        JointTable(("X",), np.array([1.5, -0.5]))


def test_exact_backend_agrees():
    J = random_table(np.random.default_rng(5), [2, 3, 2])
    E = J.to_exact()
    assert E.exact
    for a, b, c in itertools.permutations(J.names, 3):
        assert mutual_information(E, a, b, c) == pytest.approx(mutual_information(J, a, b, c), abs=1e-12)


def test_exact_table_must_sum_to_one():
    with pytest.raises(InfoContractError):
        JointTable(("X",), np.array([Fraction(1, 3), Fraction(1, 3)], dtype=object))


def test_marginalize_and_condition():
    J = JointTable.product(("A", "B"), [[0.2, 0.8], [0.5, 0.5]])
    C = condition(J, {"A": 1})
    assert C.names == ("B",) and np.allclose(C.probs, [0.5, 0.5])
    M = marginalize(J, ())
    assert M.probs.shape == () and float(M.probs) == pytest.approx(1.0)
    X = condition(copy_table(), {"Y": 1})
    assert np.allclose(X.probs.ravel(), [0.0, 1.0])


def test_zero_mass_condition():
    J = JointTable(("X",), np.array([1.0, 0.0]))
    with pytest.raises(ZeroMassError):
        condition(J, {"X": 1})


def test_facts_on_independent_bits():
    J = JointTable.product(("A", "B", "C", "D"), [[0.5, 0.5]] * 4)
    rep = verify_facts(J)
    assert rep.ok
    assert all(r.status == SATISFIED for r in rep.results)


def test_fact36_with_deterministic_d():
    # D = f(C) for every f: {0,1,2} -> {0,1}; then I(B;D|C) = 0
    rng = np.random.default_rng(11)
    base = rng.dirichlet(np.ones(2 * 2 * 3)).reshape(2, 2, 3)
    for f in itertools.product((0, 1), repeat=3):
        P = np.zeros((2, 2, 3, 2))
        for c in range(3):
            P[:, :, c, f[c]] = base[:, :, c]
        rep = verify_facts(JointTable(("A", "B", "C", "D"), P))
        assert rep["extra_condition_up"].status == SATISFIED


def test_fact36_gate():
    P = np.zeros((2, 2, 1, 2))
    P[0, 0, 0, 0] = P[1, 1, 0, 1] = 0.5      # B = D
    rep = verify_facts(JointTable(("A", "B", "C", "D"), P))
    assert rep["extra_condition_up"].status == NOT_APPLICABLE


def test_kl_identity_on_product_and_copy():
    J = JointTable.product(("A", "B", "C"), [[0.1, 0.9], [0.4, 0.6], [0.5, 0.5]])
    assert kl_mi_identity_residual(J, "A", "B", "C") <= 1e-9
    assert kl_mi_identity_residual(copy_table(), "X", "Y") <= 1e-9


def test_kl_identity_binary_corpus():
    rng = np.random.default_rng(7)
    worst = max(kl_mi_identity_residual(random_table(rng, [2, 2, 2]), "A", "B", "C") for _ in range(1000))
    assert worst <= 1e-9


def test_chain_rule_on_three_variables():
    J = random_table(np.random.default_rng(3), [3, 2, 4])
    assert chain_rule_residual(J, "A", "B", (), "C") <= 1e-9


@pytest.mark.parametrize("p", [1e-2, 1e-3, 1e-4])
def test_bernoulli_divergence_numeric_form(p):
    assert bernoulli_kl(1.01 * p, p) >= 5e-5 * p
    assert bernoulli_kl(0.99 * p, p) >= 5e-5 * p
    assert bernoulli_divergence_check(p)["ok"]


def test_planted_tables_meet_their_hypotheses():
    rng = np.random.default_rng(1)
    for _ in range(20):
        J = planted_table(rng, [3, 2, 4, 2], "B-D|C")
        assert abs(mutual_information(J, "B", "D", "C")) <= 1e-9
        J = planted_table(rng, [2, 3, 2, 4], "B-D|AC")
        assert abs(mutual_information(J, "B", "D", ("A", "C"))) <= 1e-9


def test_fact_corpus_exercises_every_fact():
    seen = {}
    for J in fact_corpus(0, 30):
        for r in verify_facts(J).results:
            seen.setdefault(r.fact, set()).add(r.status)
    for fact in ("conditioning", "kl_form", "chain_rule", "extra_condition_up", "extra_condition_down"):
        assert SATISFIED in seen[fact]


def test_table_text_round_trip():
    J = random_table(np.random.default_rng(2), [2, 3])
    back = loads_table(dumps_table(J))
    assert back.names == J.names and np.array_equal(back.probs, J.probs)
    E = J.to_exact()
    assert loads_table(dumps_table(E)).probs.tolist() == E.probs.tolist()


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

tables = st.builds(
    lambda seed, sizes, sparse: random_table(np.random.default_rng(seed), sizes, sparsity=sparse),
    st.integers(0, 2**32 - 1),
    st.lists(st.integers(2, 4), min_size=3, max_size=4),
    st.sampled_from([0.0, 0.4]),
)


@settings(max_examples=150, deadline=None)
@given(tables)
def test_information_is_nonnegative(J):
    for a, b in itertools.permutations(J.names, 2):
        rest = tuple(v for v in J.names if v not in (a, b))
        assert mutual_information(J, a, b) >= -1e-9
        assert mutual_information(J, a, b, rest) >= -1e-9
        assert entropy(J, a) - entropy(J, a, b) >= -1e-9


@settings(max_examples=150, deadline=None)
@given(tables)
def test_chain_rule_property(J):
    names = J.names
    D = names[3:] if len(names) > 3 else ()
    assert chain_rule_residual(J, names[0], names[1], names[2], D or names[2:2]) <= 1e-9
    assert kl_mi_identity_residual(J, names[0], names[1], names[2]) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(1e-6, 1 - 1e-6))
def test_bernoulli_kl_nonnegative(q, p):
    v = bernoulli_kl(q, p)
    assert v >= -1e-12
    if q == p:
        assert v == pytest.approx(0.0, abs=1e-12)
