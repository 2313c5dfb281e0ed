from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multiphase.core import (
    GENERATOR_ID,
    ContractError,
    CoordinateSelection,
    MultiphaseInstance,
    and2,
    default_word_size,
    disj,
    dumps_instance,
    enumerate_instances,
    enumerate_selections,
    hard_gamma,
    hex_to_bits,
    loads_instance,
    pack_bits,
    sample_bernoulli_rows,
    sample_hard_instance,
    sample_selection,
    unpack_bits,
)


def bits(s: str) -> list[int]:
    return [int(c) for c in s]


@pytest.mark.parametrize("s,t,expected", [("0000", "0000", 1), ("1010", "0010", 0), ("1100", "0011", 1)])
def test_disj_examples(s, t, expected):
    assert disj(bits(s), bits(t)) == expected


def test_disj_length_mismatch():
    with pytest.raises(ContractError):
        disj([1, 0], [1, 0, 0])


def test_and2_table():
    assert [and2(x, y) for x, y in itertools.product((0, 1), repeat=2)] == [0, 0, 0, 1]


@pytest.mark.parametrize("n", range(1, 7))
def test_disj_brute_force(n):
    for code in range(1 << (2 * n)):
        s = [(code >> j) & 1 for j in range(n)]
        t = [(code >> (n + j)) & 1 for j in range(n)]
        assert disj(s, t) == 1 - max(a & b for a, b in zip(s, t))


def test_hard_gamma_n4():
    assert hard_gamma(4) == pytest.approx(1 / 2000, rel=1e-15)


def test_default_word_size():
    assert default_word_size(16, 64) == 7
    assert default_word_size(1000, 2) == 11


def test_sampling_is_deterministic():
    a = sample_hard_instance(16, 2, seed=12345)
    b = sample_hard_instance(16, 2, seed=12345)
    assert a == b
    assert a.hard and a.generator == GENERATOR_ID
    assert a.gamma == hard_gamma(16)


def test_override_is_not_tagged_hard():
    inst = sample_hard_instance(8, 3, seed=1, gamma=0.3)
    assert not inst.hard and inst.gamma == 0.3


def test_hard_tag_requires_hard_gamma():
    with pytest.raises(ContractError):
        MultiphaseInstance(4, 1, [[0, 0, 0, 0]], [0, 0, 0, 0], 0.1, hard=True)


def test_instance_arrays_are_read_only():
    inst = sample_hard_instance(8, 2, seed=3)
    with pytest.raises(ValueError):
        inst.t[0] = 1


def test_first_coordinate_frequency_monte_carlo():
    # 10^6 independent draws of T^1 at n = 10^4, where gamma = 10^-5
    n, N, chunk = 10**4, 10**6, 5 * 10**4
    g = hard_gamma(n)
    hits = 0
    for start in range(0, N, chunk):
        rows = sample_bernoulli_rows(np.arange(start, start + chunk, dtype=np.uint64),
                                     np.full(chunk, 8, dtype=np.uint64), n, g)
        hits += int(rows[:, 0].sum())
    se = math.sqrt(g * (1 - g) / N)
    assert abs(hits / N - g) <= 3 * se


def test_and_frequency_is_gamma_squared():
    # override gamma so gamma^2 is measurable; the identity is the same
    g, N = 0.05, 4000
    insts = [sample_hard_instance(50, 2, seed=s, gamma=g) for s in range(N)]
    ands = np.array([inst.sets[0] & inst.t for inst in insts]).ravel()
    p = g * g
    assert abs(ands.mean() - p) <= 3 * math.sqrt(p * (1 - p) / ands.size)


def test_prefix_consistency():
    # a longer universe extends the shorter one coordinate by coordinate
    a = sample_hard_instance(64, 3, seed=9, gamma=0.2)
    b = sample_hard_instance(128, 3, seed=9, gamma=0.2)
    assert np.array_equal(a.t, b.t[:64])
    assert np.array_equal(a.sets, b.sets[:, :64])


def test_selection_validation():
    with pytest.raises(ContractError):
        CoordinateSelection((1, 1), 0)
    with pytest.raises(ContractError):
        CoordinateSelection((0, 1), 2)
    sel = CoordinateSelection((3, 0, 2), 1, 5)
    assert sel.p == 3 and sel.target == 0 and sel.before == (3,)


@pytest.mark.parametrize("k,p", [(3, 1), (4, 2), (5, 3)])
def test_selection_uniform_chi_square(k, p):
    from scipy.stats import chisquare

    tuples = enumerate_selections(k, p)
    index = {t: r for r, t in enumerate(tuples)}
    rng = np.random.default_rng(2024 + k * 10 + p)
    draws = 200 * len(tuples)
    counts = np.zeros(len(tuples))
    for _ in range(draws):
        counts[index[sample_selection(k, p, 4, rng).indices]] += 1
    assert chisquare(counts).pvalue > 1e-4


def test_enumerate_instances_bit_layout():
    codes = dict(enumerate_instances(2, 1, 0.5))
    assert len(codes) == 16
    inst = codes[0b0110]
    assert list(inst.sets[0]) == [0, 1] and list(inst.t) == [1, 0]


@given(st.lists(st.integers(0, 1), min_size=0, max_size=200), st.integers(1, 70))
def test_pack_unpack_round_trip(bs, w):
    words = pack_bits(bs, w)
    assert len(words) == -(-len(bs) // w)
    assert all(0 <= x < (1 << w) for x in words)
    assert list(unpack_bits(words, w, len(bs))) == bs


@settings(max_examples=50)
@given(st.integers(1, 40), st.integers(1, 5), st.integers(0, 2**64 - 1), st.sampled_from([None, 0.3]))
def test_instance_file_round_trip(n, k, seed, gamma):
    inst = sample_hard_instance(n, k, seed, gamma)
    text = dumps_instance(inst)
    back = loads_instance(text)
    assert back == inst
    assert dumps_instance(back) == text


def test_hex_payload_overflow():
    with pytest.raises(ContractError):
        hex_to_bits("ff", 4)
