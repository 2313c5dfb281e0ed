"""Instances of the Multiphase problem, the hard input distribution, and the
DISJ / AND primitives every other module builds on.

Indices are 0-based throughout: sets are ``S_0 .. S_{k-1}`` and coordinates
``0 .. n-1``.  Bit-vectors are ``numpy.uint8`` arrays of zeros and ones.

The sampler is counter based.  Every uniform draw is a pure function of
``(seed, row, draw index)`` computed with the SplitMix64 finaliser, and the
ones of a row are placed by geometric skipping (inversion method).  The same
algorithm, identified by :data:`GENERATOR_ID`, is easy to port, so instance
files can be regenerated bit-exactly anywhere.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "GENERATOR_ID",
    "ContractError",
    "MultiphaseInstance",
    "CoordinateSelection",
    "disj",
    "and2",
    "hard_gamma",
    "default_word_size",
    "sample_hard_instance",
    "sample_bernoulli_rows",
    "sample_selection",
    "enumerate_selections",
    "enumerate_instances",
    "pack_bits",
    "unpack_bits",
    "bits_to_hex",
    "hex_to_bits",
    "dumps_instance",
    "loads_instance",
]

GENERATOR_ID = "splitmix64-geometric-v1"

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_ROW_SALT = np.uint64(0xD1B54A32D192ED03)


class ContractError(ValueError):
    """A caller broke an operation's precondition."""


def disj(s: Sequence[int], t: Sequence[int]) -> int:
    """Return 1 iff the two bit-vectors share no position holding 1."""
    s = np.asarray(s, dtype=np.uint8)
    t = np.asarray(t, dtype=np.uint8)
    if s.shape != t.shape:
        raise ContractError(f"length mismatch: {s.shape} vs {t.shape}")
    return 0 if np.any(s & t) else 1


def and2(x: int, y: int) -> int:
    if x not in (0, 1) or y not in (0, 1):
        raise ContractError("and2 takes bits")
    return x & y


def hard_gamma(n: int) -> float:
    """Bernoulli parameter of the hard distribution, kept as a real number."""
    return 1.0 / (1000.0 * math.sqrt(n))


def default_word_size(n: int, k: int) -> int:
    return max(_ceil_log2(n), _ceil_log2(k)) + 1


def _ceil_log2(x: int) -> int:
    return 0 if x <= 1 else (int(x) - 1).bit_length()


# ---------------------------------------------------------------------------
# counter-based generator
# ---------------------------------------------------------------------------

def _splitmix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _uniform(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Uniform draws in (0, 1] from (row key, counter) pairs."""
    h = _splitmix(keys + counters * _GOLDEN)
    return ((h >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def _row_keys(seeds: np.ndarray, rows: np.ndarray) -> np.ndarray:
    return _splitmix(_splitmix(seeds) ^ (rows * _ROW_SALT))


def sample_bernoulli_rows(seeds, rows, n: int, gamma: float) -> np.ndarray:
    """Dense i.i.d. Bernoulli(gamma) rows of length ``n``.

    Row ``r`` of seed ``s`` is fully determined by ``(s, r)``; prefixes are
    consistent, so a row sampled with a smaller ``n`` is a prefix of the same
    row sampled with a larger one.
    """
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    rows = np.atleast_1d(np.asarray(rows, dtype=np.uint64))
    seeds, rows = np.broadcast_arrays(seeds, rows)
    m = seeds.shape[0]
    out = np.zeros((m, n), dtype=np.uint8)
    if n == 0 or gamma <= 0.0:
        return out
    if gamma >= 1.0:
        out[:] = 1
        return out
    keys = _row_keys(seeds, rows)
    log_q = math.log1p(-gamma)
    batch = int(n * gamma + 6.0 * math.sqrt(n * gamma) + 8)
    pos = np.full(m, -1, dtype=np.int64)       # last placed position
    drawn = np.zeros(m, dtype=np.uint64)       # draws consumed per row
    active = np.arange(m)
    with np.errstate(over="ignore"):
        while active.size:
            ctr = drawn[active, None] + np.arange(batch, dtype=np.uint64)[None, :]
            u = _uniform(keys[active, None], ctr)
            gaps = np.floor(np.log(u) / log_q).astype(np.int64)
            steps = np.cumsum(gaps + 1, axis=1) + pos[active, None]
            hit_r, hit_c = np.nonzero(steps < n)
            out[active[hit_r], steps[hit_r, hit_c]] = 1
            pos[active] = steps[:, -1]
            drawn[active] += np.uint64(batch)
            active = active[pos[active] < n]
    return out


@dataclass(frozen=True)
class MultiphaseInstance:
    """``k`` sets and an update set ``T`` over the universe ``[n]``."""

    n: int
    k: int
    sets: np.ndarray
    t: np.ndarray
    gamma: float
    seed: int = 0
    hard: bool = False
    generator: str = GENERATOR_ID

    def __post_init__(self):
        sets = np.array(self.sets, dtype=np.uint8, copy=True).reshape(self.k, self.n)
        t = np.array(self.t, dtype=np.uint8, copy=True).reshape(self.n)
        if self.n < 1 or self.k < 1:
            raise ContractError("n and k must be positive")
        if np.any(sets > 1) or np.any(t > 1):
            raise ContractError("bit-vectors hold zeros and ones only")
        if not 0.0 < self.gamma < 1.0:
            raise ContractError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.hard and not math.isclose(self.gamma, hard_gamma(self.n), rel_tol=1e-12):
            raise ContractError("hard-distribution instances use gamma = 1/(1000 sqrt n)")
        sets.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "t", t)

    def s(self, i: int) -> np.ndarray:
        return self.sets[i]

    def answer(self, i: int) -> int:
        return disj(self.sets[i], self.t)

    def with_t(self, t) -> "MultiphaseInstance":
        return MultiphaseInstance(self.n, self.k, self.sets, t, self.gamma, self.seed, False, self.generator)

    def with_sets(self, sets) -> "MultiphaseInstance":
        return MultiphaseInstance(self.n, self.k, sets, self.t, self.gamma, self.seed, False, self.generator)

    def __eq__(self, other):
        if not isinstance(other, MultiphaseInstance):
            return NotImplemented
        return (
            (self.n, self.k, self.gamma, self.seed, self.hard, self.generator)
            == (other.n, other.k, other.gamma, other.seed, other.hard, other.generator)
            and np.array_equal(self.sets, other.sets)
            and np.array_equal(self.t, other.t)
        )

    __hash__ = None


def sample_hard_instance(n: int, k: int, seed: int, gamma: float | None = None) -> MultiphaseInstance:
    """Sample every ``S_i^j`` and ``T^j`` i.i.d. Bernoulli(gamma).

    With ``gamma=None`` the hard value ``1/(1000 sqrt n)`` is used and the
    instance is tagged hard; an explicit override is never tagged hard.
    """
    if n < 1 or k < 1:
        raise ContractError("n and k must be positive")
    hard = gamma is None
    g = hard_gamma(n) if hard else float(gamma)
    if not 0.0 < g < 1.0:
        raise ContractError(f"gamma must lie in (0, 1), got {g}")
    seed = int(seed) & _MASK64
    bits = sample_bernoulli_rows(np.full(k + 1, seed, dtype=np.uint64), np.arange(k + 1, dtype=np.uint64), n, g)
    return MultiphaseInstance(n, k, bits[:k], bits[k], g, seed, hard)


def enumerate_instances(n: int, k: int, gamma: float) -> Iterator[tuple[int, MultiphaseInstance]]:
    """All ``2^(n(k+1))`` instances, in code order.

    Bit ``i*n + j`` of the code is ``S_i^j`` and bit ``k*n + j`` is ``T^j``.
    """
    total = n * (k + 1)
    weights = 1 << np.arange(total, dtype=np.int64)
    for code in range(1 << total):
        bits = ((code & weights) != 0).astype(np.uint8).reshape(k + 1, n)
        yield code, MultiphaseInstance(n, k, bits[:k], bits[k], gamma)


# ---------------------------------------------------------------------------
# coordinate selections (P, ell, j)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoordinateSelection:
    indices: tuple[int, ...]
    ell: int
    j: int = 0

    def __post_init__(self):
        p = len(self.indices)
        if p < 1:
            raise ContractError("a selection holds at least one index")
        if len(set(self.indices)) != p:
            raise ContractError(f"selected indices must be distinct: {self.indices}")
        if not 0 <= self.ell < p:
            raise ContractError(f"ell={self.ell} outside [0, {p})")
        if self.j < 0:
            raise ContractError("j must be non-negative")

    @property
    def p(self) -> int:
        return len(self.indices)

    @property
    def target(self) -> int:
        return self.indices[self.ell]

    @property
    def before(self) -> tuple[int, ...]:
        return self.indices[: self.ell]


def sample_selection(k: int, p: int, n: int, rng: np.random.Generator) -> CoordinateSelection:
    if not 1 <= p <= k:
        raise ContractError(f"need 1 <= p <= k, got p={p}, k={k}")
    idx = tuple(int(v) for v in rng.permutation(k)[:p])
    return CoordinateSelection(idx, int(rng.integers(p)), int(rng.integers(n)))


def enumerate_selections(k: int, p: int) -> list[tuple[int, ...]]:
    """Every ordered p-tuple of distinct indices; each is equally likely."""
    if not 1 <= p <= k:
        raise ContractError(f"need 1 <= p <= k, got p={p}, k={k}")
    return list(itertools.permutations(range(k), p))


# ---------------------------------------------------------------------------
# word packing and the instance file format
# ---------------------------------------------------------------------------

def pack_bits(bits: Sequence[int], w: int) -> list[int]:
    """Pack bits into w-bit words, element ``b`` at bit ``b % w`` of word ``b // w``."""
    if w < 1:
        raise ContractError("word size must be positive")
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size == 0:
        return []
    q = -(-bits.size // w)
    padded = np.zeros(q * w, dtype=object if w > 62 else np.int64)
    padded[: bits.size] = bits
    weights = np.array([1 << r for r in range(w)], dtype=padded.dtype)
    return [int(v) for v in padded.reshape(q, w) @ weights]


def unpack_bits(words: Sequence[int], w: int, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.uint8)
    for b in range(n):
        out[b] = (words[b // w] >> (b % w)) & 1
    return out


def bits_to_hex(bits) -> str:
    bits = np.asarray(bits, dtype=np.uint8)
    value = 0
    for j in np.flatnonzero(bits):
        value |= 1 << int(j)
    width = max(1, (len(bits) + 3) // 4)
    return format(value, f"0{width}x")


def hex_to_bits(text: str, n: int) -> np.ndarray:
    value = int(text, 16)
    if value >> n:
        raise ContractError(f"hex payload {text!r} exceeds {n} bits")
    return np.array([(value >> j) & 1 for j in range(n)], dtype=np.uint8)


def dumps_instance(inst: MultiphaseInstance) -> str:
    lines = [
        "# multiphase-instance v1",
        f"n = {inst.n}",
        f"k = {inst.k}",
        f"gamma = {inst.gamma!r}",
        f"seed = {inst.seed}",
        f"generator = {inst.generator}",
        f"hard = {'true' if inst.hard else 'false'}",
    ]
    lines += [f"S[{i}] = {bits_to_hex(inst.sets[i])}" for i in range(inst.k)]
    lines.append(f"T = {bits_to_hex(inst.t)}")
    return "\n".join(lines) + "\n"


def loads_instance(text: str) -> MultiphaseInstance:
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ContractError(f"line {lineno}: expected 'key = value'")
        fields[key.strip()] = value.strip()
    try:
        n, k = int(fields["n"]), int(fields["k"])
        sets = np.stack([hex_to_bits(fields[f"S[{i}]"], n) for i in range(k)])
        t = hex_to_bits(fields["T"], n)
        return MultiphaseInstance(
            n, k, sets, t,
            gamma=float(fields["gamma"]),
            seed=int(fields["seed"]),
            hard=fields.get("hard", "false") == "true",
            generator=fields.get("generator", GENERATOR_ID),
        )
    except KeyError as exc:
        raise ContractError(f"instance file is missing field {exc}") from None
