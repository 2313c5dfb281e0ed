"""Dynamic cell-probe simulator for the Multiphase problem.

A data structure is three procedures.  ``preprocess`` sees all sets and
writes the pre-update memory ``M``.  ``update`` sees ``T`` (and may read the
memory) and its writes form the layer ``Delta``.  ``query`` is a generator:
it receives only a :class:`QueryContext` (the index ``i`` and a read-only copy
of ``S_i``), yields :class:`Probe` requests and gets words back, and finally
returns the answer bit.  The harness is the only thing that can see ``T`` or
the other sets, so a query can learn about them only through its probes.

A probe into ``Delta`` at an address the update never wrote returns
:data:`BOTTOM` (``None``).  A probe into ``M`` at an address never written
returns 0.  Layer membership is decided by the write log, not by address
ranges.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Generator, Iterable, Sequence

import numpy as np

from .core import (
    ContractError,
    MultiphaseInstance,
    default_word_size,
    disj,
    enumerate_instances,
    pack_bits,
    sample_hard_instance,
)

__all__ = [
    "BOTTOM",
    "LAYER_M",
    "LAYER_DELTA",
    "LAYER_FREE",
    "HarnessError",
    "CorrectnessError",
    "Probe",
    "QueryContext",
    "LogEntry",
    "ProbeLog",
    "Memory",
    "Budgets",
    "DataStructureSpec",
    "MultiphaseRun",
    "Verdict",
    "run_multiphase",
    "run_query",
    "prepare",
    "replay_query",
    "enforce_semi_adaptive",
    "check_isolation",
    "ds_precompute_answers",
    "ds_store_T",
    "ds_sqrt_scheme",
    "ds_probe_own_bitmap",
    "shipped_schemes",
    "AdviceScheme",
    "Decision",
    "ExplicitTAdvice",
    "verify_advice",
    "SoundnessReport",
    "exhaustive_soundness",
    "random_soundness",
    "benchmark",
    "BENCH_COLUMNS",
    "rows_to_csv",
]

BOTTOM = None
LAYER_M = "M"
LAYER_DELTA = "D"
LAYER_FREE = "S"
ADDRESS_LIMIT = 1 << 64


class HarnessError(RuntimeError):
    """A data structure broke the memory model (bad address, oversize word, ...)."""


class CorrectnessError(AssertionError):
    def __init__(self, scheme: str, inst: MultiphaseInstance, i: int, got: int):
        self.scheme, self.inst, self.i, self.got = scheme, inst, i, got
        super().__init__(
            f"{scheme}: query {i} answered {got}, expected {inst.answer(i)} "
            f"(n={inst.n}, k={inst.k}, seed={inst.seed})"
        )


@dataclass(frozen=True)
class Probe:
    layer: str
    address: int


@dataclass(frozen=True)
class QueryContext:
    i: int
    s_i: np.ndarray
    n: int
    k: int
    w: int


# (phase, layer, op, address, word); word is None for a bottom read
LogEntry = tuple


@dataclass
class ProbeLog:
    entries: list = field(default_factory=list)

    def append(self, phase: str, layer: str, op: str, address, word) -> None:
        self.entries.append((phase, layer, op, address, word))

    def _reads(self, layer: str) -> int:
        return sum(1 for e in self.entries if e[0] == "III" and e[1] == layer and e[2] == "read")

    @property
    def t1(self) -> int:
        return self._reads(LAYER_M)

    @property
    def t2(self) -> int:
        return self._reads(LAYER_DELTA)

    @property
    def tq(self) -> int:
        return self.t1 + self.t2

    @property
    def alternations(self) -> int:
        layers = [e[1] for e in self.entries if e[0] == "III" and e[1] in (LAYER_M, LAYER_DELTA)]
        return sum(1 for a, b in zip(layers, layers[1:]) if a != b)

    def probes(self) -> list[tuple[str, int]]:
        return [(e[1], e[3]) for e in self.entries if e[0] == "III" and e[1] != LAYER_FREE]

    def words(self) -> list:
        return [e[4] for e in self.entries if e[0] == "III" and e[1] != LAYER_FREE]

    def writes(self, phase: str | None = None) -> list[tuple[int, int]]:
        return [(e[3], e[4]) for e in self.entries if e[2] == "write" and (phase is None or e[0] == phase)]

    def to_lines(self) -> list[str]:
        out = []
        for phase, layer, op, addr, word in self.entries:
            a = "-" if addr is None else format(addr, "x")
            wd = "bot" if word is None else format(word, "x")
            out.append(f"{phase} {layer} {op} {a} {wd}")
        return out

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "ProbeLog":
        log = cls()
        for line in lines:
            line = line.strip()
            if not line:
                continue
            phase, layer, op, a, wd = line.split()
            log.append(phase, layer, op, None if a == "-" else int(a, 16), None if wd == "bot" else int(wd, 16))
        return log


class Memory:
    """Two-layer word memory: ``cells`` written in Phase I, ``delta`` in Phase II."""

    def __init__(self, w: int):
        if w < 1:
            raise ContractError("word size must be positive")
        self.w = w
        self.cells: dict[int, int] = {}
        self.delta: dict[int, int] = {}
        self.phase = "I"
        self.log = ProbeLog()
        self.writes = {"I": 0, "II": 0}

    def _check(self, address: int, word: int | None = None) -> None:
        if not isinstance(address, (int, np.integer)) or not 0 <= address < ADDRESS_LIMIT:
            raise HarnessError(f"address {address!r} outside [0, 2^64)")
        if word is not None and not 0 <= word < (1 << self.w):
            raise HarnessError(f"word {word!r} does not fit in {self.w} bits")

    # Phase I / II port -----------------------------------------------------
    def read(self, address: int) -> int:
        self._check(address)
        address = int(address)
        if self.phase == "II" and address in self.delta:
            word = self.delta[address]
        else:
            word = self.cells.get(address, 0)
        self.log.append(self.phase, LAYER_M if address not in self.delta else LAYER_DELTA, "read", address, word)
        return word

    def write(self, address: int, word: int) -> None:
        address, word = int(address), int(word)
        self._check(address, word)
        if self.phase == "I":
            self.cells[address] = word
            layer = LAYER_M
        elif self.phase == "II":
            self.delta[address] = word
            layer = LAYER_DELTA
        else:
            raise HarnessError("writes are not allowed while answering queries")
        self.writes[self.phase] += 1
        self.log.append(self.phase, layer, "write", address, word)

    def write_words(self, base: int, words: Sequence[int]) -> None:
        for q, word in enumerate(words):
            self.write(base + q, word)

    # Phase III -------------------------------------------------------------
    def probe(self, p: Probe):
        self._check(p.address)
        if p.layer == LAYER_M:
            return self.cells.get(int(p.address), 0)
        if p.layer == LAYER_DELTA:
            return self.delta.get(int(p.address), BOTTOM)
        raise HarnessError(f"unknown layer {p.layer!r}")


@dataclass(frozen=True)
class Budgets:
    t_u: int
    t1: int
    t2: int

    @property
    def tq(self) -> int:
        return self.t1 + self.t2


Query = Callable[[QueryContext], Generator]


@dataclass(frozen=True)
class DataStructureSpec:
    name: str
    preprocess: Callable[[np.ndarray, Memory, int, int, int], None]
    update: Callable[[np.ndarray, Memory, int, int, int], None]
    query: Query
    budgets: Callable[[int, int, int], Budgets]
    address_bits: Callable[[int, int, int], int] | None = None


@dataclass
class MultiphaseRun:
    scheme: str
    inst: MultiphaseInstance
    w: int
    budgets: Budgets
    memory: Memory
    queries: list[int]
    answers: list[int]
    logs: list[ProbeLog]
    tags: list[str]

    @property
    def phase1_writes(self) -> int:
        return self.memory.writes["I"]

    @property
    def phase2_writes(self) -> int:
        return self.memory.writes["II"]

    @property
    def update_log(self) -> ProbeLog:
        return self.memory.log


def _drive(gen: Generator, oracle: Callable[[Probe], object]):
    try:
        probe = next(gen)
        while True:
            if not isinstance(probe, Probe):
                raise HarnessError(f"query yielded {probe!r}, expected a Probe")
            probe = gen.send(oracle(probe))
    except StopIteration as stop:
        value = stop.value
    if isinstance(value, tuple):
        answer, tag = value
    else:
        answer, tag = value, ""
    if answer not in (0, 1):
        raise HarnessError(f"query returned {answer!r}, expected a bit")
    return int(answer), tag


def _context(inst: MultiphaseInstance, i: int, w: int) -> QueryContext:
    s = inst.sets[i].copy()
    s.flags.writeable = False
    return QueryContext(i, s, inst.n, inst.k, w)


def run_query(ds: DataStructureSpec, memory: Memory, inst: MultiphaseInstance, i: int):
    """Answer one query against a prepared memory; returns (answer, log, tag)."""
    if not 0 <= i < inst.k:
        raise ContractError(f"query index {i} outside [0, {inst.k})")
    log = ProbeLog()
    log.append("III", LAYER_FREE, "read", None, None)

    def oracle(p: Probe):
        word = memory.probe(p)
        log.append("III", p.layer, "read", int(p.address), word)
        return word

    answer, tag = _drive(ds.query(_context(inst, i, memory.w)), oracle)
    return answer, log, tag


def replay_query(ds: DataStructureSpec, ctx: QueryContext, words: Sequence) -> tuple[list[tuple[str, int]], int | None]:
    """Drive a query with a fixed sequence of returned words.

    Returns the probe sequence and the answer (``None`` if the words ran out).
    """
    probes: list[tuple[str, int]] = []
    it = iter(words)

    class _Exhausted(Exception):
        pass

    def oracle(p: Probe):
        probes.append((p.layer, int(p.address)))
        try:
            return next(it)
        except StopIteration:
            raise _Exhausted from None

    try:
        answer, _ = _drive(ds.query(ctx), oracle)
    except _Exhausted:
        return probes, None
    return probes, answer


def prepare(ds: DataStructureSpec, inst: MultiphaseInstance, w: int | None = None) -> Memory:
    w = w or default_word_size(inst.n, inst.k)
    mem = Memory(w)
    sets = inst.sets.copy()
    sets.flags.writeable = False
    ds.preprocess(sets, mem, inst.n, inst.k, w)
    mem.phase = "II"
    t = inst.t.copy()
    t.flags.writeable = False
    ds.update(t, mem, inst.n, inst.k, w)
    mem.phase = "III"
    budgets = ds.budgets(inst.n, inst.k, w)
    cap = inst.n * budgets.t_u
    if len(mem.delta) > cap or mem.writes["II"] > cap:
        raise HarnessError(
            f"{ds.name}: Phase II wrote {mem.writes['II']} words to {len(mem.delta)} cells, "
            f"budget n*t_u = {cap}"
        )
    return mem


def run_multiphase(
    ds: DataStructureSpec,
    inst: MultiphaseInstance,
    queries: Sequence[int] | None = None,
    w: int | None = None,
    *,
    check: bool = True,
) -> MultiphaseRun:
    """Run Phases I and II once, then answer every query in ``queries``."""
    w = w or default_word_size(inst.n, inst.k)
    queries = list(range(inst.k)) if queries is None else [int(q) for q in queries]
    mem = prepare(ds, inst, w)
    answers, logs, tags = [], [], []
    for i in queries:
        answer, log, tag = run_query(ds, mem, inst, i)
        if check and answer != inst.answer(i):
            raise CorrectnessError(ds.name, inst, i, answer)
        answers.append(answer)
        logs.append(log)
        tags.append(tag)
    return MultiphaseRun(ds.name, inst, w, ds.budgets(inst.n, inst.k, w), mem, queries, answers, logs, tags)


# ---------------------------------------------------------------------------
# discipline checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str = ""
    entry: int | None = None   # 1-based index into the log entries

    def __bool__(self) -> bool:
        return self.ok


def enforce_semi_adaptive(log: ProbeLog, budgets) -> Verdict:
    """All M reads before all Delta reads, within budgets, and no writes.

    ``budgets`` is a :class:`Budgets` or a ``(t1, t2)`` pair.
    """
    t1_max, t2_max = (budgets.t1, budgets.t2) if isinstance(budgets, Budgets) else budgets
    t1 = t2 = 0
    seen_delta = False
    for idx, (phase, layer, op, addr, _word) in enumerate(log.entries, 1):
        if phase != "III":
            continue
        if op == "write":
            return Verdict(False, "write during query phase", idx)
        if layer == LAYER_M:
            if seen_delta:
                return Verdict(False, "M read after a Delta read (more than one alternation)", idx)
            t1 += 1
            if t1 > t1_max:
                return Verdict(False, f"t1 = {t1} exceeds budget {t1_max}", idx)
        elif layer == LAYER_DELTA:
            seen_delta = True
            t2 += 1
            if t2 > t2_max:
                return Verdict(False, f"t2 = {t2} exceeds budget {t2_max}", idx)
    return Verdict(True)


def check_isolation(ds: DataStructureSpec, inst: MultiphaseInstance, i: int, mutated: MultiphaseInstance, w: int | None = None) -> Verdict:
    """Compare a query's probes on ``inst`` and on ``mutated`` (same ``S_i``).

    The address sequences must agree up to the first probe whose returned
    word differs, and replaying the recorded words against the mutated
    instance's context must reproduce the original probes exactly.
    """
    if not np.array_equal(inst.sets[i], mutated.sets[i]):
        raise ContractError("isolation check needs the same S_i in both instances")
    w = w or default_word_size(inst.n, inst.k)
    _, log_a, _ = run_query(ds, prepare(ds, inst, w), inst, i)
    _, log_b, _ = run_query(ds, prepare(ds, mutated, w), mutated, i)
    pa, pb, wa, wb = log_a.probes(), log_b.probes(), log_a.words(), log_b.words()
    for step, (x, y) in enumerate(zip(pa, pb)):
        if x != y:
            return Verdict(False, f"probe {step} differs before any returned word did: {x} vs {y}", step + 1)
        if wa[step] != wb[step]:
            break
    else:
        if len(pa) != len(pb):
            return Verdict(False, "probe sequences differ in length with identical words")
    replayed, _ = replay_query(ds, _context(mutated, i, w), wa)
    if replayed != pa:
        return Verdict(False, "replay with recorded words changed the probe sequence")
    return Verdict(True)


# ---------------------------------------------------------------------------
# shipped data structures
# ---------------------------------------------------------------------------

def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _bitmap_words(bits: np.ndarray, w: int) -> list[int]:
    return pack_bits(bits, w)


def _probe_bitmap(s_i: np.ndarray, positions: Iterable[int], base: int, w: int):
    """Probe the distinct bitmap words covering ``positions``; early exit on a hit."""
    by_word: dict[int, list[int]] = {}
    for j in positions:
        by_word.setdefault(int(j) // w, []).append(int(j) % w)
    for q in sorted(by_word):
        word = yield Probe(LAYER_DELTA, base + q)
        if word is BOTTOM:
            raise HarnessError(f"bitmap word {base + q} was never written")
        if any((word >> r) & 1 for r in by_word[q]):
            return 0
    return 1


def ds_precompute_answers() -> DataStructureSpec:
    """Phase II writes every answer; a query is one Delta lookup."""

    def layout(n, k, w):
        return _ceil_div(k, w), _ceil_div(n, w)   # answer words, words per set

    def preprocess(sets, mem, n, k, w):
        a, per = layout(n, k, w)
        for i in range(k):
            mem.write_words(a + i * per, _bitmap_words(sets[i], w))

    def update(t, mem, n, k, w):
        a, per = layout(n, k, w)
        tw = _bitmap_words(t, w)
        answers = np.zeros(k, dtype=np.uint8)
        for i in range(k):
            hit = any(mem.read(a + i * per + q) & tw[q] for q in range(per))
            answers[i] = 0 if hit else 1
        mem.write_words(0, _bitmap_words(answers, w))

    def query(ctx):
        word = yield Probe(LAYER_DELTA, ctx.i // ctx.w)
        return (word >> (ctx.i % ctx.w)) & 1

    def budgets(n, k, w):
        return Budgets(t_u=2 * _ceil_div(k, w), t1=0, t2=1)

    def address_bits(n, k, w):
        a, per = layout(n, k, w)
        return (a + k * per - 1).bit_length()

    return DataStructureSpec("precompute_answers", preprocess, update, query, budgets, address_bits)


def ds_store_T() -> DataStructureSpec:
    """No preprocessing; Phase II stores T's bitmap and queries probe it."""

    def preprocess(sets, mem, n, k, w):
        pass

    def update(t, mem, n, k, w):
        mem.write_words(0, _bitmap_words(t, w))

    def query(ctx):
        return (yield from _probe_bitmap(ctx.s_i, np.flatnonzero(ctx.s_i), 0, ctx.w))

    def budgets(n, k, w):
        return Budgets(t_u=2, t1=0, t2=_ceil_div(n, w))

    def address_bits(n, k, w):
        return (_ceil_div(n, w) - 1).bit_length()

    return DataStructureSpec("store_T", preprocess, update, query, budgets, address_bits)


def ds_probe_own_bitmap() -> DataStructureSpec:
    """Like store_T, but first reads S_i's own bitmap from M.

    Useless as a data structure; it exists so the reductions have a
    non-empty M layer to carry through Megan's message.
    """

    def preprocess(sets, mem, n, k, w):
        per = _ceil_div(n, w)
        for i in range(k):
            mem.write_words(i * per, _bitmap_words(sets[i], w))

    def update(t, mem, n, k, w):
        mem.write_words(k * _ceil_div(n, w), _bitmap_words(t, w))

    def query(ctx):
        per = _ceil_div(ctx.n, ctx.w)
        support = []
        for q in range(per):
            word = yield Probe(LAYER_M, ctx.i * per + q)
            support += [q * ctx.w + r for r in range(ctx.w) if (word >> r) & 1]
        return (yield from _probe_bitmap(ctx.s_i, support, ctx.k * per, ctx.w))

    def budgets(n, k, w):
        per = _ceil_div(n, w)
        return Budgets(t_u=2, t1=per, t2=per)

    def address_bits(n, k, w):
        return ((k + 1) * _ceil_div(n, w) - 1).bit_length()

    return DataStructureSpec("probe_own_bitmap", preprocess, update, query, budgets, address_bits)


# -- advice-based sqrt(n) scheme ---------------------------------------------

@dataclass(frozen=True)
class Decision:
    """Outcome of decoding advice: a definite answer, candidates, or fallback."""

    answer: int | None = None
    candidates: tuple[int, ...] | None = None
    fallback: bool = False


class AdviceScheme:
    """Contract for the advice written ahead of T's bitmap.

    ``decode`` may use only the advice bits, ``i`` and ``S_i``.  It returns a
    definite answer, or a candidate set ``P`` inside ``S_i`` of size at most
    ``sqrt(n)`` that contains every element of ``S_i`` lying in ``T``, or a
    fallback request (probe every element of ``S_i``).
    """

    name = "advice"

    def encode(self, t: np.ndarray) -> str:
        raise NotImplementedError

    def max_bits(self, n: int) -> int:
        raise NotImplementedError

    def total_bits(self, prefix: str, n: int) -> int | None:
        """Length of the advice given a prefix, or None if more bits are needed."""
        raise NotImplementedError

    def decode(self, bits: str, i: int, s_i: np.ndarray) -> Decision:
        raise NotImplementedError


def _uint_bits(value: int, width: int) -> str:
    return "".join("1" if (value >> b) & 1 else "0" for b in range(width))


def _bits_uint(bits: str) -> int:
    return sum(1 << b for b, c in enumerate(bits) if c == "1")


class ExplicitTAdvice(AdviceScheme):
    """Lists T's positions when ``|T| <= isqrt(n)``, otherwise asks for fallback.

    Layout (bit-stream, LSB-first inside each word): one mode bit (0 =
    explicit), a count of ``bitlen(isqrt(n))`` bits, then ``count`` positions
    of ``max(1, ceil(log2 n))`` bits each.  Mode bit 1 means fallback and
    nothing follows.
    """

    name = "explicit_T"

    def __init__(self, n: int):
        self.n = n
        self.limit = math.isqrt(n)
        self.cbits = max(1, self.limit.bit_length())
        self.pbits = max(1, (n - 1).bit_length())

    def encode(self, t):
        pos = np.flatnonzero(t)
        if len(pos) > self.limit:
            return "1"
        return "0" + _uint_bits(len(pos), self.cbits) + "".join(_uint_bits(int(j), self.pbits) for j in pos)

    def max_bits(self, n):
        return 1 + self.cbits + self.limit * self.pbits

    def total_bits(self, prefix, n):
        if not prefix:
            return None
        if prefix[0] == "1":
            return 1
        if len(prefix) < 1 + self.cbits:
            return None
        return 1 + self.cbits + _bits_uint(prefix[1 : 1 + self.cbits]) * self.pbits

    def decode(self, bits, i, s_i):
        if bits[0] == "1":
            return Decision(fallback=True)
        count = _bits_uint(bits[1 : 1 + self.cbits])
        start = 1 + self.cbits
        t_pos = {_bits_uint(bits[start + c * self.pbits : start + (c + 1) * self.pbits]) for c in range(count)}
        hit = any(s_i[j] for j in t_pos)
        return Decision(answer=0 if hit else 1)


def _word_to_bits(word: int, w: int) -> str:
    return _uint_bits(word, w)


def ds_sqrt_scheme(advice: AdviceScheme | Callable[[int], AdviceScheme] | None = None) -> DataStructureSpec:
    """Phase II writes advice words then T's bitmap; queries decode the advice first.

    ``advice`` is an :class:`AdviceScheme` factory taking ``n`` (default
    :class:`ExplicitTAdvice`).  Queries tag themselves ``answer``,
    ``candidates`` or ``fallback`` according to the decode outcome.
    """
    factory = advice if callable(advice) and not isinstance(advice, AdviceScheme) else (
        (lambda n: advice) if advice is not None else ExplicitTAdvice
    )
    cache: dict[int, AdviceScheme] = {}

    def adv(n):
        if n not in cache:
            cache[n] = factory(n)
        return cache[n]

    def advice_words(n, w):
        return _ceil_div(adv(n).max_bits(n), w)

    def preprocess(sets, mem, n, k, w):
        pass

    def update(t, mem, n, k, w):
        bits = adv(n).encode(t)
        mem.write_words(0, pack_bits([int(c) for c in bits], w))
        mem.write_words(advice_words(n, w), _bitmap_words(t, w))

    def query(ctx):
        n, w = ctx.n, ctx.w
        a = adv(n)
        bits, addr = "", 0
        while True:
            need = a.total_bits(bits, n)
            if need is not None and len(bits) >= need:
                break
            word = yield Probe(LAYER_DELTA, addr)
            if word is BOTTOM:
                raise HarnessError(f"advice word {addr} was never written")
            bits += _word_to_bits(word, w)
            addr += 1
        dec = a.decode(bits[:need], ctx.i, ctx.s_i)
        if dec.answer is not None:
            return dec.answer, "answer"
        if dec.fallback:
            positions, tag = np.flatnonzero(ctx.s_i), "fallback"
        else:
            positions, tag = dec.candidates, "candidates"
            if len(positions) > math.isqrt(n) or any(not ctx.s_i[j] for j in positions):
                raise HarnessError(f"advice {a.name}: candidate set violates the decode contract")
        ans = yield from _probe_bitmap(ctx.s_i, positions, advice_words(n, w), w)
        return ans, tag

    def budgets(n, k, w):
        return Budgets(t_u=4, t1=0, t2=advice_words(n, w) + _ceil_div(n, w))

    def address_bits(n, k, w):
        return (advice_words(n, w) + _ceil_div(n, w) - 1).bit_length()

    return DataStructureSpec("sqrt_scheme", preprocess, update, query, budgets, address_bits)


def verify_advice(advice: AdviceScheme, n: int, trials: int, seed: int, gamma: float | None = None) -> Verdict:
    """Check the decode contract on random (S_i, T) pairs."""
    rng = np.random.default_rng(seed)
    g = gamma if gamma is not None else 1.0 / math.sqrt(n)
    for trial in range(trials):
        s = (rng.random(n) < g).astype(np.uint8)
        t = (rng.random(n) < g).astype(np.uint8)
        bits = advice.encode(t)
        need = advice.total_bits(bits, n)
        if need != len(bits) or len(bits) > advice.max_bits(n):
            return Verdict(False, f"trial {trial}: advice length {len(bits)} inconsistent")
        dec = advice.decode(bits, 0, s)
        truth = disj(s, t)
        if dec.answer is not None and dec.answer != truth:
            return Verdict(False, f"trial {trial}: decoded answer {dec.answer} != {truth}")
        if dec.candidates is not None:
            p = set(dec.candidates)
            if not p <= set(np.flatnonzero(s)) or len(p) > math.isqrt(n):
                return Verdict(False, f"trial {trial}: candidate set not inside S_i or too large")
            if not set(np.flatnonzero(s & t)) <= p:
                return Verdict(False, f"trial {trial}: candidate set misses a witness")
    return Verdict(True)


def shipped_schemes() -> list[DataStructureSpec]:
    return [ds_precompute_answers(), ds_store_T(), ds_sqrt_scheme()]


# ---------------------------------------------------------------------------
# soundness sweeps and benchmarks
# ---------------------------------------------------------------------------

@dataclass
class SoundnessReport:
    scheme: str
    checked: int = 0
    total: int = 0
    failures: list = field(default_factory=list)
    complete: bool = True

    @property
    def ok(self) -> bool:
        return self.complete and not self.failures


def _check_instance(ds: DataStructureSpec, inst: MultiphaseInstance, w: int | None, report: SoundnessReport) -> None:
    run = run_multiphase(ds, inst, w=w, check=False)
    for i, ans, log in zip(run.queries, run.answers, run.logs):
        if ans != inst.answer(i):
            report.failures.append((inst.seed, i, "wrong answer"))
        v = enforce_semi_adaptive(log, run.budgets)
        if not v:
            report.failures.append((inst.seed, i, v.reason))
    report.checked += 1


def exhaustive_soundness(ds: DataStructureSpec, n: int, k: int, w: int | None = None, deadline: float | None = None) -> SoundnessReport:
    """Every instance over [n] with k sets; stops early (incomplete) at ``deadline``."""
    report = SoundnessReport(ds.name, total=1 << (n * (k + 1)))
    for code, inst in enumerate_instances(n, k, 0.5):
        if deadline is not None and (code & 0xFF) == 0 and time.monotonic() > deadline:
            report.complete = False
            break
        _check_instance(ds, inst, w, report)
    return report


def random_soundness(ds: DataStructureSpec, n: int, k: int, count: int, seed: int, gamma: float | None = None, w: int | None = None) -> SoundnessReport:
    report = SoundnessReport(ds.name, total=count)
    for r in range(count):
        _check_instance(ds, sample_hard_instance(n, k, seed + r, gamma), w, report)
    return report


BENCH_COLUMNS = ("scheme", "n", "k", "w", "mean_t1", "mean_t2", "p99_tq", "phaseII_writes")


def benchmark(
    schemes: Sequence[DataStructureSpec],
    n: int,
    k: int,
    queries: int,
    seed: int,
    gamma: float | None = None,
    w: int | None = None,
    queries_per_instance: int | None = None,
) -> list[dict]:
    """Probe statistics per scheme over seeded hard instances.

    Each row also carries ``conformant`` (every query passed the
    semi-adaptive check) and ``tag_counts`` (the decode outcome tags).
    """
    w = w or default_word_size(n, k)
    per = queries_per_instance or min(k, queries)
    rows = []
    for ds in schemes:
        t1s, t2s, writes, tags = [], [], [], {}
        conformant = True
        done, r = 0, 0
        while done < queries:
            inst = sample_hard_instance(n, k, seed + r, gamma)
            rng = np.random.default_rng([seed, r])
            qs = rng.integers(0, k, size=min(per, queries - done))
            run = run_multiphase(ds, inst, qs, w)
            for log, tag in zip(run.logs, run.tags):
                t1s.append(log.t1)
                t2s.append(log.t2)
                tags[tag] = tags.get(tag, 0) + 1
                conformant &= bool(enforce_semi_adaptive(log, run.budgets))
            writes.append(run.phase2_writes)
            done += len(qs)
            r += 1
        tq = np.add(t1s, t2s)
        rows.append({
            "scheme": ds.name,
            "n": n,
            "k": k,
            "w": w,
            "mean_t1": float(np.mean(t1s)),
            "mean_t2": float(np.mean(t2s)),
            "p99_tq": float(np.percentile(tq, 99)),
            "phaseII_writes": float(np.mean(writes)),
            "conformant": conformant,
            "tag_counts": tags,
        })
    return rows


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str] = BENCH_COLUMNS) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(round(v, 6))
    return str(v)
