from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from multiphase.cellprobe import (
    Budgets,
    DataStructureSpec,
    LAYER_DELTA,
    LAYER_M,
    Probe,
    ds_precompute_answers,
    ds_probe_own_bitmap,
    ds_sqrt_scheme,
    ds_store_T,
    run_multiphase,
)
from multiphase.circuits import answer_table_ds, random_circuit, static_disj_problem, translate_circuit
from multiphase.core import ContractError, MultiphaseInstance, enumerate_instances, sample_hard_instance
from multiphase.info import entropy, mutual_information
from multiphase.nof import (
    FOUR_PARTY,
    FOUR_PARTY_MODIFIED,
    THREE_PARTY,
    EnumerationTooLarge,
    Msg,
    ProtocolCostError,
    ProtocolEnumeration,
    ProtocolSpec,
    VisibilityError,
    advice_is_t,
    constant_answer,
    ds_to_4party,
    dumps_transcript,
    forwards_first_bit,
    megan_broadcasts_s_i,
    nonadaptive_identity,
    one_point_five_check,
    one_point_five_protocols,
    protocol_joint_distribution,
    reduction_check,
    registered_protocols,
    run_all,
    run_protocol,
    simulate_one_point_five,
    static_ds_to_3round,
    verify_goodq_bounds,
    verify_round_elimination,
    visibility_audit,
)


def _bits(v) -> str:
    return "".join(str(int(b)) for b in v)


def test_megan_broadcast_protocol():
    inst = sample_hard_instance(12, 4, seed=2, gamma=0.3)
    for tr in run_all(megan_broadcasts_s_i(), inst):
        assert tr.answer == inst.answer(tr.i)
        assert len(tr.megan) == 12


def test_constant_protocol_on_empty_T():
    inst = MultiphaseInstance(6, 3, np.ones((3, 6), dtype=np.uint8), np.zeros(6, dtype=np.uint8), 0.5)
    assert all(tr.answer == 1 for tr in run_all(constant_answer(1), inst))


def test_transcripts_are_deterministic():
    inst = sample_hard_instance(8, 3, seed=5, gamma=0.4)
    proto = ds_to_4party(ds_probe_own_bitmap(), 8, 3, w=5)
    a = [dumps_transcript(run_protocol(proto, inst, i)) for i in range(3)]
    b = [dumps_transcript(run_protocol(proto, inst, i)) for i in range(3)]
    assert a == b
    assert a[0].startswith("protocol = ds_to_4party(probe_own_bitmap)")


def test_cost_budget_enforced():
    proto = ProtocolSpec("long", FOUR_PARTY, alice=lambda c: Msg(""), bob=lambda c: Msg("1", last=True),
                         megan=lambda c: _bits(c.s_i), max_pi=3)
    with pytest.raises(ProtocolCostError):
        run_protocol(proto, sample_hard_instance(8, 2, 0, gamma=0.5), 0)


def test_three_party_model_has_no_megan():
    with pytest.raises(ContractError):
        ProtocolSpec("bad", THREE_PARTY, alice=lambda c: Msg("1", last=True), bob=lambda c: Msg(""),
                     megan=lambda c: "1")
    with pytest.raises(ContractError):
        ProtocolSpec("bad", FOUR_PARTY_MODIFIED, alice=lambda c: Msg("1", last=True), bob=lambda c: Msg(""))


def _alice_peeks_on_second_turn() -> ProtocolSpec:
    def alice(ctx):
        if not ctx.history:
            return Msg(_bits(ctx.s_i))
        return Msg(str(int(ctx.sets[(ctx.i + 1) % ctx.k][0])), last=True)

    return ProtocolSpec("peek", FOUR_PARTY, alice=alice, bob=lambda c: Msg("0"))


def test_audit_catches_alice_second_turn():
    inst = sample_hard_instance(6, 3, seed=1, gamma=0.5)
    rep = visibility_audit(_alice_peeks_on_second_turn(), inst, 0, trials=50, seed=0)
    assert not rep.ok
    v = rep.first
    # Alice's second message is the third message overall
    assert v.party == "alice" and v.round == 3
    assert "S_-i" in v.hidden
    assert "party=alice round=3" in rep.to_text()


def test_audit_catches_megan_reading_T():
    proto = ProtocolSpec("megan_t", FOUR_PARTY, alice=lambda c: Msg(""),
                         bob=lambda c: Msg(str(int(not np.any(c.s_i & c.t))), last=True),
                         megan=lambda c: _bits(c.t))
    rep = visibility_audit(proto, sample_hard_instance(8, 2, 3, gamma=0.5), 0, trials=20, seed=0)
    assert not rep.ok and rep.first.party == "megan" and rep.first.round == 0


def test_audit_catches_bob_reading_S():
    # crashes and differences under resampling both count
    proto = ProtocolSpec("bob_s", THREE_PARTY, alice=lambda c: Msg(""),
                         bob=lambda c: Msg(str(int(c.s_i[0])), last=True))
    rep = visibility_audit(proto, sample_hard_instance(8, 3, 4, gamma=0.5), 1, trials=40, seed=0)
    assert not rep.ok and rep.first.party == "bob"


@pytest.mark.parametrize("ds", [ds_store_T(), ds_probe_own_bitmap(), ds_precompute_answers()], ids=lambda d: d.name)
def test_reduction_audit_clean(ds):
    proto = ds_to_4party(ds, 8, 3, w=6)
    for seed in range(3):
        rep = visibility_audit(proto, sample_hard_instance(8, 3, seed, gamma=0.4), seed % 3, trials=100, seed=seed)
        assert rep.ok, rep.to_text()


def test_reduction_matches_data_structure():
    proto = ds_to_4party(ds_store_T(), 32, 5)
    inst = sample_hard_instance(32, 5, seed=8, gamma=0.2)
    w = proto.meta["w"]
    for rec in reduction_check(proto, inst):
        assert rec.protocol_answer == rec.ds_answer == inst.answer(rec.i)
        assert rec.pi_ok(w) and rec.u_ok(32, w)


def test_precompute_reduction_cost():
    proto = ds_to_4party(ds_precompute_answers(), 16, 8, w=8)
    for seed in range(20):
        for rec in reduction_check(proto, sample_hard_instance(16, 8, seed, gamma=0.3)):
            assert rec.tq == 1 and rec.pi_bits - 1 <= 4 * 1 * 8


def test_sqrt_scheme_reduction_cost():
    n, k = 2**12, 4
    proto = ds_to_4party(ds_sqrt_scheme(), n, k, certify=4)
    w = proto.meta["w"]
    runs = 0
    seed = 0
    while runs < 1000:
        for rec in reduction_check(proto, sample_hard_instance(n, k, seed)):
            assert rec.protocol_answer == rec.ds_answer
            assert rec.pi_ok(w)
            runs += 1
        seed += 1


@pytest.mark.parametrize("n,k", [(2, 3), (3, 2), (4, 2)])
def test_reduction_exhaustive_equivalence(n, k):
    for ds in (ds_store_T(), ds_probe_own_bitmap()):
        proto = ds_to_4party(ds, n, k, w=max(3, (n * (k + 1)).bit_length()), certify=4)
        for _, inst in enumerate_instances(n, k, 0.5):
            run = run_multiphase(ds, inst, w=proto.meta["w"])
            assert [tr.answer for tr in run_all(proto, inst)] == run.answers


def test_non_semi_adaptive_ds_refused():
    def update(t, mem, n, k, w):
        mem.write(0, sum(int(b) << j for j, b in enumerate(t)))

    def query(ctx):
        word = yield Probe(LAYER_DELTA, 0)
        yield Probe(LAYER_M, 0)
        return int(not any(ctx.s_i[j] and (word >> j) & 1 for j in range(ctx.n)))

    zigzag = DataStructureSpec("zigzag", lambda *a: None, update, query,
                               lambda n, k, w: Budgets(1, 5, 5), lambda n, k, w: 1)
    with pytest.raises(ContractError, match="not semi-adaptive"):
        ds_to_4party(zigzag, 4, 2, w=4, certify=2)


def test_joint_distribution_normalized():
    J = protocol_joint_distribution(ds_to_4party(ds_store_T(), 2, 2, w=3), 2, 2, 1, gamma=0.3)
    assert float(J.probs.sum()) == pytest.approx(1.0, abs=1e-9)


def test_silent_protocol_gives_product():
    J = protocol_joint_distribution(constant_answer(1), 1, 2, 1, gamma=0.4)
    assert abs(mutual_information(J, "S", "T", "Z")) <= 1e-12
    assert abs(mutual_information(J, "S", "T")) <= 1e-12


def test_forwarded_bit_hand_computation():
    # n=1: Z carries T itself, so I(S;T|Z) = 0; at n=2 it carries T^0 only
    g = 0.3
    J = protocol_joint_distribution(forwards_first_bit(), 2, 2, 1, gamma=g)
    assert mutual_information(J, "Z", "T") == pytest.approx(-(g * math.log2(g) + (1 - g) * math.log2(1 - g)), abs=1e-12)
    assert abs(mutual_information(J, "S", "T", "Z")) <= 1e-12


def test_enumeration_bound():
    with pytest.raises(EnumerationTooLarge, match="2\\^21"):
        ProtocolEnumeration(constant_answer(1), 3, 6)


def test_goodq_bounds_store_T():
    rep = verify_goodq_bounds(ds_to_4party(ds_store_T(), 2, 3, w=3), 2, 3, 2)
    assert rep.ok, "\n".join(rep.lines())
    assert len(rep.checks) == 5


def test_goodq_bounds_full_advice():
    rep = verify_goodq_bounds(advice_is_t(), 2, 3, 2)
    assert rep.ok
    d = [c for c in rep.checks if c.name.startswith("(d) I(S;T|Z)")][0]
    assert d.lhs <= (2 + 2) / 2


def test_goodq_bounds_constant_advice():
    rep = verify_goodq_bounds(constant_answer(1), 2, 3, 2, gamma=0.3)
    last = rep.checks[-1]
    assert last.rhs == pytest.approx(2 / 2) and abs(last.lhs) <= 1e-12


def test_goodq_refuses_audit_failure():
    with pytest.raises(VisibilityError):
        verify_goodq_bounds(_alice_peeks_on_second_turn(), 2, 3, 2)


@pytest.mark.parametrize("idx", range(5))
def test_registered_protocols_information_identities(idx):
    proto = registered_protocols(2, 3)[idx]
    enum = ProtocolEnumeration(proto, 2, 3, gamma=0.3)
    assert enum.answers_correct()
    if proto.model == FOUR_PARTY:
        assert nonadaptive_identity(proto, 2, 3, 2, enum=enum) <= 1e-12
    worst = verify_round_elimination(enum)
    assert worst["alice"] <= 1e-12 and worst["bob"] <= 1e-12


def test_round_elimination_detects_hidden_dependence():
    enum = ProtocolEnumeration(_alice_peeks_on_second_turn(), 2, 2, gamma=0.5)
    assert verify_round_elimination(enum)["alice"] > 0.1


@pytest.mark.parametrize("idx", range(4))
def test_one_point_five_simulation(idx):
    proto = one_point_five_protocols()[idx]
    rep = one_point_five_check(proto, 2, 2)
    assert rep.ok and rep.answers_equal and rep.max_megan <= 2 * rep.C


def test_simulation_is_modified_model():
    sim = simulate_one_point_five(one_point_five_protocols()[1])
    assert sim.model == FOUR_PARTY_MODIFIED
    rep = visibility_audit(sim, sample_hard_instance(4, 2, 0, gamma=0.5), 1, trials=50, seed=0)
    assert rep.ok, rep.to_text()


def test_static_bridge_answer_table():
    k, w = 8, 4
    A = np.eye(k, dtype=np.uint8)
    prob = static_disj_problem(A)
    sds = answer_table_ds(prob, w)
    assert sds.s == 2
    proto = static_ds_to_3round(sds)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.integers(0, 2, size=k, dtype=np.uint8)
        inst = MultiphaseInstance(k, k, A, x, 0.5)
        for tr in run_all(proto, inst):
            assert tr.answer == prob.answer(tr.i, x)
            assert tr.pi_bits - 1 <= 2 * 1 * w
            assert len(tr.u) == k


def test_static_bridge_accepts_translated_circuit():
    c = random_circuit(np.random.default_rng(3), 6, 4, 2, max_wires=30)
    proto = static_ds_to_3round(translate_circuit(c, 2))
    assert proto.model == THREE_PARTY


class _AdaptiveStatic:
    name = "adaptive"
    s, w, k, n = 4, 2, 1, 4

    def preprocess(self, x):
        return [int(v) for v in x]

    def query(self, i):
        first = yield 0
        yield 1 + first   # second address depends on the first word
        return first


def test_static_bridge_refuses_adaptive():
    with pytest.raises(ContractError, match="probe 2"):
        static_ds_to_3round(_AdaptiveStatic())
