from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multiphase.cellprobe import (
    BOTTOM,
    LAYER_DELTA,
    LAYER_M,
    AdviceScheme,
    Budgets,
    CorrectnessError,
    DataStructureSpec,
    Decision,
    ExplicitTAdvice,
    HarnessError,
    Memory,
    Probe,
    ProbeLog,
    benchmark,
    check_isolation,
    ds_precompute_answers,
    ds_probe_own_bitmap,
    ds_sqrt_scheme,
    ds_store_T,
    enforce_semi_adaptive,
    exhaustive_soundness,
    random_soundness,
    rows_to_csv,
    run_multiphase,
    shipped_schemes,
    verify_advice,
)
from multiphase.core import MultiphaseInstance, sample_hard_instance


def make_instance(n, sets, t, gamma=0.5):
    rows = np.zeros((len(sets), n), dtype=np.uint8)
    for i, s in enumerate(sets):
        rows[i, list(s)] = 1
    tv = np.zeros(n, dtype=np.uint8)
    tv[list(t)] = 1
    return MultiphaseInstance(n, len(sets), rows, tv, gamma)


def log_of(*layers):
    log = ProbeLog()
    for q, layer in enumerate(layers):
        log.append("III", layer, "read", q, 0)
    return log


def test_store_T_single_hit():
    inst = make_instance(8, [{3}, set()], {3})
    run = run_multiphase(ds_store_T(), inst, [0])
    assert run.answers == [0]
    assert run.logs[0].t2 == 1 and run.logs[0].t1 == 0


@pytest.mark.parametrize("scheme", shipped_schemes() + [ds_probe_own_bitmap()], ids=lambda d: d.name)
def test_empty_T_answers_one(scheme):
    inst = make_instance(16, [{1, 5}, {0, 15}, set()], set())
    assert run_multiphase(scheme, inst).answers == [1, 1, 1]


def test_precompute_single_probe_and_write_count():
    inst = sample_hard_instance(16, 64, seed=4, gamma=0.2)
    run = run_multiphase(ds_precompute_answers(), inst, w=8)
    assert run.phase2_writes == 8
    assert all(log.tq == 1 for log in run.logs)


def test_precompute_random_instances():
    rep = random_soundness(ds_precompute_answers(), 12, 5, count=1000, seed=0, gamma=0.3)
    assert rep.ok and rep.checked == 1000


def test_store_T_probe_counts():
    ds = ds_store_T()
    assert run_multiphase(ds, make_instance(64, [set()], {2})).logs[0].t2 == 0
    # w = 7 at n=64,k=1; positions 0, 20, 40 lie in distinct words
    run = run_multiphase(ds, make_instance(64, [{0, 20, 40}], {1}), w=7)
    assert run.logs[0].t2 == 3 and run.answers == [1]
    full = run_multiphase(ds, make_instance(64, [set(range(64))], set()), w=7)
    assert full.logs[0].t2 == math.ceil(64 / 7)


def test_store_T_hard_distribution_mean():
    # mean number of Delta probes is about |S_i| ~ n*gamma = 1e-3 * sqrt(n)
    n, k = 10**6, 1000
    g = 1 / (1000 * math.sqrt(n))
    t2 = []
    for seed in range(10):
        inst = sample_hard_instance(n, k, seed)
        run = run_multiphase(ds_store_T(), inst)
        t2 += [log.t2 for log in run.logs]
    t2 = np.array(t2)
    mean = n * g
    assert abs(t2.mean() - mean) <= 3 * math.sqrt(mean / len(t2)) + 1e-9


def test_semi_adaptive_verdicts():
    ok = enforce_semi_adaptive(log_of(LAYER_M, LAYER_M, LAYER_DELTA, LAYER_DELTA), (2, 2))
    assert ok.ok
    bad = enforce_semi_adaptive(log_of(LAYER_M, LAYER_DELTA, LAYER_M), (5, 5))
    assert not bad.ok and bad.entry == 3
    over = enforce_semi_adaptive(log_of(LAYER_M, LAYER_M), Budgets(t_u=1, t1=1, t2=0))
    assert not over.ok and "t1" in over.reason


def test_query_phase_write_is_rejected():
    log = log_of(LAYER_M)
    log.append("III", LAYER_DELTA, "write", 0, 1)
    assert not enforce_semi_adaptive(log, (5, 5)).ok


@pytest.mark.parametrize("scheme", shipped_schemes() + [ds_probe_own_bitmap()], ids=lambda d: d.name)
def test_shipped_schemes_conform(scheme):
    for seed in range(20):
        run = run_multiphase(scheme, sample_hard_instance(32, 4, seed, gamma=0.2))
        assert all(enforce_semi_adaptive(log, run.budgets) for log in run.logs)


def test_unwritten_delta_is_bottom():
    mem = Memory(8)
    mem.write(5, 0xAB)
    mem.phase = "II"
    mem.write(6, 1)
    mem.phase = "III"
    assert mem.probe(Probe(LAYER_DELTA, 5)) is BOTTOM
    assert mem.probe(Probe(LAYER_M, 5)) == 0xAB
    assert mem.probe(Probe(LAYER_DELTA, 6)) == 1
    with pytest.raises(HarnessError):
        mem.write(7, 0)


def test_address_space_enforced():
    mem = Memory(4)
    with pytest.raises(HarnessError):
        mem.write(-1, 0)
    with pytest.raises(HarnessError):
        mem.write(0, 16)
    with pytest.raises(HarnessError):
        mem.probe(Probe(LAYER_M, 1 << 64))


def test_wrong_answer_is_reported():
    def query(ctx):
        return 0
        yield  # pragma: no cover

    liar = DataStructureSpec(
        "liar", lambda *a: None, lambda *a: None, query,
        lambda n, k, w: Budgets(1, 0, 0), lambda n, k, w: 1,
    )
    with pytest.raises(CorrectnessError):
        run_multiphase(liar, make_instance(4, [set()], set()))


def test_probe_log_round_trip():
    run = run_multiphase(ds_probe_own_bitmap(), sample_hard_instance(16, 3, 1, gamma=0.4))
    for log in run.logs + [run.update_log]:
        assert ProbeLog.from_lines(log.to_lines()).entries == log.entries


@pytest.mark.parametrize("scheme", shipped_schemes() + [ds_probe_own_bitmap()], ids=lambda d: d.name)
def test_isolation_under_mutation(scheme):
    rng = np.random.default_rng(0)
    for seed in range(10):
        inst = sample_hard_instance(24, 3, seed, gamma=0.3)
        i = int(rng.integers(3))
        t = (rng.random(24) < 0.3).astype(np.uint8)
        sets = (rng.random((3, 24)) < 0.3).astype(np.uint8)
        sets[i] = inst.sets[i]
        assert check_isolation(scheme, inst, i, inst.with_t(t))
        assert check_isolation(scheme, inst, i, inst.with_sets(sets))


def test_isolation_catches_a_peeking_query():
    leaked = {}

    def update(t, mem, n, k, w):
        leaked["t"] = t
        mem.write(0, 1)
        mem.write(1, 1)

    def query(ctx):
        addr = int(leaked["t"][0])   # address chosen from T without a probe
        yield Probe(LAYER_DELTA, addr)
        return 1

    cheat = DataStructureSpec("cheat", lambda *a: None, update, query,
                              lambda n, k, w: Budgets(2, 0, 1), lambda n, k, w: 1)
    inst = make_instance(4, [set()], set())
    assert not check_isolation(cheat, inst, 0, inst.with_t(np.array([1, 0, 0, 0], dtype=np.uint8)))


@pytest.mark.parametrize("scheme", shipped_schemes(), ids=lambda d: d.name)
def test_exhaustive_small(scheme):
    rep = exhaustive_soundness(scheme, 3, 2)
    assert rep.ok and rep.checked == rep.total == 2**9


def test_sqrt_scheme_empty_T():
    run = run_multiphase(ds_sqrt_scheme(), make_instance(64, [{1, 2}], set()), w=7)
    assert run.answers == [1] and run.logs[0].t2 == 1 and run.tags == ["answer"]


def test_sqrt_scheme_explicit_decode_needs_no_T_probes():
    n, w = 64, 7
    inst = make_instance(n, [{3, 9}, {10, 40}], {9, 40, 50})
    run = run_multiphase(ds_sqrt_scheme(), inst, w=w)
    adv_words = math.ceil(ExplicitTAdvice(n).encode(inst.t).__len__() / w)
    assert run.answers == [0, 0]
    assert all(log.t2 == adv_words for log in run.logs)


def test_sqrt_scheme_fallback_when_T_large():
    n = 16
    inst = make_instance(n, [{1, 2}], set(range(0, 16, 2)))
    run = run_multiphase(ds_sqrt_scheme(), inst)
    assert run.tags == ["fallback"] and run.answers == [0]


def test_sqrt_scheme_hard_distribution_profile():
    n = 2**16
    rows = benchmark([ds_sqrt_scheme()], n, 4, queries=1000, seed=0)
    row = rows[0]
    assert row["conformant"]
    w = row["w"]
    assert row["p99_tq"] <= 3 * math.sqrt(n) * math.log2(n) / w
    assert row["tag_counts"].get("fallback", 0) == 0


class _BadCandidates(AdviceScheme):
    name = "bad"

    def encode(self, t):
        return "0"

    def max_bits(self, n):
        return 1

    def total_bits(self, prefix, n):
        return 1 if prefix else None

    def decode(self, bits, i, s_i):
        return Decision(candidates=())


def test_advice_contract_violation_is_flagged():
    assert verify_advice(ExplicitTAdvice(64), 64, trials=500, seed=1, gamma=0.1)
    verdict = verify_advice(_BadCandidates(), 16, trials=200, seed=1, gamma=0.5)
    assert not verdict.ok and "witness" in verdict.reason


def test_benchmark_csv_columns():
    rows = benchmark(shipped_schemes(), 64, 4, queries=20, seed=3)
    lines = rows_to_csv(rows).splitlines()
    assert lines[0] == "scheme,n,k,w,mean_t1,mean_t2,p99_tq,phaseII_writes"
    assert len(lines) == 4


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(1, 4), st.integers(0, 2**32), st.floats(0.05, 0.9))
def test_soundness_property(n, k, seed, gamma):
    inst = sample_hard_instance(n, k, seed, gamma)
    for scheme in shipped_schemes() + [ds_probe_own_bitmap()]:
        run = run_multiphase(scheme, inst, check=False)
        assert run.answers == [inst.answer(i) for i in range(k)]
        assert all(enforce_semi_adaptive(log, run.budgets) for log in run.logs)
