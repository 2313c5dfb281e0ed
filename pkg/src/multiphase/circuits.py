"""Unbounded fan-in circuits with arbitrary gates and their static data structures.

Nodes ``0 .. n-1`` are the inputs; gates take the ids that follow.  A gate
is a kind (``table``, ``or``, ``and``, ``nor``, ``nand``, ``xor``,
``threshold``, ``const``) applied to an ordered list of node ids.
:func:`translate_circuit` turns a circuit into a non-adaptive static structure
that stores the input and the values of the high fan-in gates.
"""
from __future__ import annotations

import graphlib
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .core import ContractError, MultiphaseInstance, disj

__all__ = [
    "TABLE_FANIN_LIMIT",
    "KINDS",
    "Gate",
    "Circuit",
    "CircuitParseError",
    "CircuitCycleError",
    "reference_eval",
    "linear_operator_circuit",
    "identity_circuit",
    "random_circuit",
    "StaticProblem",
    "static_disj_problem",
    "StaticDS",
    "StaticRun",
    "CircuitDS",
    "translate_circuit",
    "viola_translate",
    "answer_table_ds",
    "run_static",
    "nonadaptivity_audit",
    "dumps_circuit",
    "loads_circuit",
]

TABLE_FANIN_LIMIT = 20
KINDS = ("table", "or", "and", "nor", "nand", "xor", "threshold", "const")


class CircuitCycleError(ContractError):
    def __init__(self, nodes):
        super().__init__(f"circuit has a cycle through {list(nodes)}")
        self.nodes = list(nodes)


class CircuitParseError(ContractError):
    def __init__(self, line: int, col: int, msg: str):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line, self.col = line, col


@dataclass(frozen=True)
class Gate:
    kind: str
    inputs: tuple[int, ...]
    param: int = 0   # truth table for "table", threshold for "threshold", value for "const"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "inputs", tuple(int(v) for v in self.inputs))
        f = len(self.inputs)
        if self.kind == "table":
            if f > TABLE_FANIN_LIMIT:
                raise ContractError(f"table gate with fan-in {f} > {TABLE_FANIN_LIMIT}; use a symbolic kind")
            if not 0 <= self.param < (1 << (1 << f)):
                raise ContractError("truth table does not fit the fan-in")
        elif self.kind == "const":
            if f or self.param not in (0, 1):
                raise ContractError("const gate takes no inputs and a 0/1 value")
        elif self.kind == "threshold":
            if self.param < 0:
                raise ContractError("threshold must be non-negative")

    @property
    def fan_in(self) -> int:
        return len(self.inputs)

    def lookup(self) -> np.ndarray:
        """Truth table as a uint8 array indexed by sum(bit_p << p)."""
        tbl = self.__dict__.get("_lookup")
        if tbl is None:
            raw = self.param.to_bytes(max(1, ((1 << self.fan_in) + 7) // 8), "little")
            tbl = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[: 1 << self.fan_in].copy()
            object.__setattr__(self, "_lookup", tbl)
        return tbl

    def apply(self, vals: Sequence[np.ndarray], batch: int) -> np.ndarray:
        """Evaluate on a batch; ``vals`` holds one uint8 array per input."""
        k = self.kind
        if k == "const":
            return np.full(batch, self.param, dtype=np.uint8)
        if not vals:
            # empty OR / XOR are 0, empty AND is 1, thresholds compare 0 >= t
            base = {"or": 0, "xor": 0, "and": 1, "nor": 1, "nand": 0}.get(k)
            if k == "threshold":
                base = int(self.param <= 0)
            elif k == "table":
                base = self.param & 1
            return np.full(batch, base, dtype=np.uint8)
        V = np.stack(vals)
        if k == "table":
            idx = np.zeros(batch, dtype=np.int64)
            for pos, v in enumerate(vals):
                idx |= v.astype(np.int64) << pos
            return self.lookup()[idx]
        if k == "or":
            return V.max(axis=0)
        if k == "and":
            return V.min(axis=0)
        if k == "nor":
            return 1 - V.max(axis=0)
        if k == "nand":
            return 1 - V.min(axis=0)
        if k == "xor":
            return (V.sum(axis=0) & 1).astype(np.uint8)
        return (V.sum(axis=0, dtype=np.int64) >= self.param).astype(np.uint8)


@dataclass(frozen=True)
class Circuit:
    n_inputs: int
    gates: tuple[Gate, ...]
    outputs: tuple[int, ...]
    order: tuple[int, ...] = field(init=False, repr=False)
    levels: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_inputs
        if n < 0:
            raise ContractError("n_inputs must be non-negative")
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "outputs", tuple(int(o) for o in self.outputs))
        total = n + len(self.gates)
        ts = graphlib.TopologicalSorter()
        for gid, g in enumerate(self.gates, start=n):
            for v in g.inputs:
                if not 0 <= v < total:
                    raise ContractError(f"gate {gid} reads undefined node {v}")
            ts.add(gid, *[v for v in g.inputs if v >= n])
        try:
            order = tuple(ts.static_order())
        except graphlib.CycleError as exc:
            raise CircuitCycleError(exc.args[1]) from None
        for o in self.outputs:
            if not n <= o < total:
                raise ContractError(f"output {o} is not a gate")
        lv = [0] * total
        for gid in order:
            ins = self.gates[gid - n].inputs
            lv[gid] = 1 + max((lv[v] for v in ins), default=-1)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "levels", tuple(lv))

    @property
    def k(self) -> int:
        return len(self.outputs)

    @property
    def wires(self) -> int:
        return sum(g.fan_in for g in self.gates)

    @property
    def depth(self) -> int:
        return max((self.levels[o] for o in self.outputs), default=0)

    def gate(self, node: int) -> Gate:
        return self.gates[node - self.n_inputs]

    def eval_nodes(self, X: np.ndarray) -> dict[int, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=np.uint8))
        if X.shape[1] != self.n_inputs:
            raise ContractError(f"input has {X.shape[1]} bits, circuit expects {self.n_inputs}")
        vals = {j: X[:, j] for j in range(self.n_inputs)}
        for gid in self.order:
            g = self.gate(gid)
            vals[gid] = g.apply([vals[v] for v in g.inputs], X.shape[0])
        return vals

    def eval(self, x) -> np.ndarray:
        """Outputs for one input vector (shape (k,)) or a batch (shape (B, k))."""
        x = np.asarray(x, dtype=np.uint8)
        vals = self.eval_nodes(x)
        out = np.stack([vals[o] for o in self.outputs], axis=-1) if self.outputs else \
            np.zeros((np.atleast_2d(x).shape[0], 0), dtype=np.uint8)
        return out[0] if x.ndim == 1 else out


def reference_eval(c: Circuit, x: Sequence[int]) -> list[int]:
    """Scalar evaluator written independently of :meth:`Circuit.eval`."""
    memo: dict[int, int] = {j: int(b) for j, b in enumerate(x)}

    def val(node: int) -> int:
        if node in memo:
            return memo[node]
        g = c.gate(node)
        bits = [val(v) for v in g.inputs]
        if g.kind == "const":
            r = g.param
        elif g.kind == "table":
            r = (g.param >> sum(b << p for p, b in enumerate(bits))) & 1
        elif g.kind == "or":
            r = int(any(bits))
        elif g.kind == "and":
            r = int(all(bits))
        elif g.kind == "nor":
            r = int(not any(bits))
        elif g.kind == "nand":
            r = int(not all(bits))
        elif g.kind == "xor":
            r = sum(bits) % 2
        else:
            r = int(sum(bits) >= g.param)
        memo[node] = r
        return r

    return [val(o) for o in c.outputs]


def linear_operator_circuit(A) -> Circuit:
    """Depth-1 circuit computing ``Ax`` over the boolean semiring."""
    A = np.asarray(A, dtype=np.uint8)
    if A.ndim != 2:
        raise ContractError("A must be a k x n matrix")
    k, n = A.shape
    gates = [Gate("or", tuple(np.flatnonzero(A[i]))) for i in range(k)]
    return Circuit(n, tuple(gates), tuple(range(n, n + k)))


def identity_circuit(n: int) -> Circuit:
    return Circuit(n, tuple(Gate("or", (j,)) for j in range(n)), tuple(range(n, 2 * n)))


def random_circuit(rng: np.random.Generator, n: int, k: int, depth: int, max_wires: int = 10_000,
                   gates_per_level: int | None = None) -> Circuit:
    """Seeded random layered circuit of exactly the given depth.

    Fan-ins are heavy-tailed so that translations see both narrow and wide
    gates; every gate on level L reads at least one node from level L-1.
    """
    if depth < 1 or n < 1 or k < 1:
        raise ContractError("need n, k, depth >= 1")
    per = gates_per_level or int(rng.integers(max(k, 2), max(k, 2) * 3 + 1))
    budget = max_wires
    gates: list[Gate] = []
    by_level: list[list[int]] = [list(range(n))]
    for level in range(1, depth + 1):
        count = k if level == depth else per
        below = [v for lv in by_level for v in lv]
        prev = by_level[-1]
        mine = []
        for _ in range(count):
            left = max(1, budget // max(1, (depth - level + 1) * count))
            cap = min(len(below), left, 64 if rng.random() < 0.8 else 4096)
            f = int(min(cap, max(1, np.floor(rng.pareto(1.2) + 1))))
            ins = [int(rng.choice(prev))]
            if f > 1:
                ins += [int(v) for v in rng.choice(below, size=f - 1, replace=True)]
            budget -= len(ins)
            kind = str(rng.choice(["or", "and", "nor", "nand", "xor", "threshold", "table"]))
            param = 0
            if kind == "table":
                if len(ins) > 6:
                    kind = "xor"
                else:
                    param = int(rng.integers(0, 1 << (1 << len(ins)), dtype=np.uint64))
            elif kind == "threshold":
                param = int(rng.integers(0, len(ins) + 1))
            mine.append(n + len(gates))
            gates.append(Gate(kind, tuple(ins), param))
        by_level.append(mine)
    return Circuit(n, tuple(gates), tuple(by_level[-1]))


# ---------------------------------------------------------------------------
# static problems and data structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StaticProblem:
    """Query ``i`` on stored input ``x`` answers ``f(A_i, x)``."""
    A: np.ndarray
    f: Callable[[np.ndarray, np.ndarray], int]
    name: str = "static"

    @property
    def k(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def answer(self, i: int, x) -> int:
        if not 0 <= i < self.k:
            raise ContractError(f"query {i} out of range [0, {self.k})")
        return int(self.f(self.A[i], np.asarray(x, dtype=np.uint8)))

    def answers(self, x) -> np.ndarray:
        return np.array([self.answer(i, x) for i in range(self.k)], dtype=np.uint8)

    def instance(self, x) -> MultiphaseInstance:
        """The same question as a multiphase instance with sets A and update x."""
        return MultiphaseInstance(self.n, self.k, self.A, np.asarray(x, dtype=np.uint8), 0.5)


def static_disj_problem(A) -> StaticProblem:
    A = np.asarray(A, dtype=np.uint8)
    if A.ndim != 2:
        raise ContractError("A must be a k x n matrix")
    A.flags.writeable = False
    return StaticProblem(A, disj, "disj")


def disj_circuit(A) -> Circuit:
    """Query i is NOR over {x_j : A_ij = 1}."""
    A = np.asarray(A, dtype=np.uint8)
    k, n = A.shape
    return Circuit(n, tuple(Gate("nor", tuple(np.flatnonzero(A[i]))) for i in range(k)), tuple(range(n, n + k)))


class StaticDS:
    """A static structure: ``preprocess(x)`` builds ``s`` words of ``w`` bits;
    ``query(i)`` is a generator that yields addresses, receives words, and
    returns the answer."""

    name = "static"
    n: int
    k: int
    s: int
    w: int

    def preprocess(self, x) -> list[int]:
        raise NotImplementedError

    def query(self, i: int) -> Iterator[int]:
        raise NotImplementedError


@dataclass
class StaticRun:
    answer: int
    addresses: list[int]
    words: list[int]

    @property
    def probes(self) -> int:
        return len(self.addresses)

    def to_lines(self) -> list[str]:
        return [f"III\tM\tread\t{a:x}\t{v:x}" for a, v in zip(self.addresses, self.words)]


def run_static(sds: StaticDS, x, i: int, memory: list[int] | None = None) -> StaticRun:
    if not 0 <= i < sds.k:
        raise ContractError(f"query {i} out of range [0, {sds.k})")
    mem = sds.preprocess(x) if memory is None else memory
    if len(mem) > sds.s:
        raise ContractError(f"memory image uses {len(mem)} cells > s = {sds.s}")
    addrs, words = [], []
    gen = sds.query(i)
    try:
        a = next(gen)
        while True:
            if not 0 <= a < len(mem):
                raise ContractError(f"probe to unallocated cell {a}")
            addrs.append(int(a))
            words.append(int(mem[a]))
            a = gen.send(mem[a])
    except StopIteration as stop:
        return StaticRun(int(stop.value), addrs, words)


def nonadaptivity_audit(sds: StaticDS, trials: int, seed: int = 0) -> tuple[bool, str]:
    """Replay every query on perturbed inputs and compare address sequences."""
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 2, size=sds.n, dtype=np.uint8)
    plans = [run_static(sds, base, i).addresses for i in range(sds.k)]
    for t in range(trials):
        x = base.copy()
        flips = rng.integers(0, 2, size=sds.n).astype(bool) if t % 2 else rng.random(sds.n) < 1.0 / max(1, sds.n)
        x[flips] ^= 1
        i = int(rng.integers(sds.k))
        got = run_static(sds, x, i).addresses
        if got != plans[i]:
            return False, f"query {i} changed its probe plan on trial {t}"
    return True, "ok"


class _AnswerTable(StaticDS):
    def __init__(self, problem: StaticProblem, w: int | None = None):
        self.problem, self.name = problem, f"answer_table({problem.name})"
        self.n, self.k = problem.n, problem.k
        # a word must be able to hold any cell address
        self.w = w or max(1, (problem.k - 1).bit_length())
        self.s = -(-problem.k // self.w)
        if self.s > 1 and (self.s - 1).bit_length() > self.w:
            raise ContractError(f"w = {self.w} cannot address {self.s} cells")

    def preprocess(self, x) -> list[int]:
        ans = self.problem.answers(x)
        return [sum(int(ans[i]) << b for b, i in enumerate(range(q * self.w, min(self.k, (q + 1) * self.w))))
                for q in range(self.s)]

    def query(self, i: int):
        word = yield i // self.w
        return (word >> (i % self.w)) & 1


def answer_table_ds(problem: StaticProblem, w: int | None = None) -> StaticDS:
    """Stores every answer, ``w`` per word; one probe per query."""
    return _AnswerTable(problem, w)


class CircuitDS(StaticDS):
    """Input bits in cells ``0..n-1``; stored gate values in cells ``n..n+|G|-1``."""

    def __init__(self, c: Circuit, r: int):
        self.circuit, self.r = c, r
        self.name = f"circuit_ds(r={r})"
        n, ell = c.n_inputs, c.wires
        self.n, self.k, self.s = n, c.k, n + r
        self.w = max(math.ceil(math.log2(n)) if n > 1 else 0, math.ceil(math.log2(r)) if r > 1 else 0) + 1
        self.threshold = ell / r
        self.stored = tuple(g for g in range(n, n + len(c.gates)) if c.gate(g).fan_in > self.threshold)
        if ell > 0 and not len(self.stored) < r:
            raise AssertionError(f"|G| = {len(self.stored)} is not < r = {r}")
        self.cell = {g: n + pos for pos, g in enumerate(self.stored)}
        self._plans = [self._plan(o) for o in c.outputs]
        self.bound = self.threshold ** c.depth
        self.max_probes = max((len(p) for p in self._plans), default=0)
        self.max_probes_with_repeats = max((self._count(o, {}) for o in c.outputs), default=0)
        if self.max_probes_with_repeats > self.bound + 1e-9 * max(1.0, self.bound):
            raise AssertionError(f"query cost {self.max_probes_with_repeats} exceeds (l/r)^d = {self.bound}")

    def _count(self, node: int, memo: dict) -> int:
        """Probes of the recursive resolution, counting repeated visits."""
        if node < self.n or node in self.cell:
            return 1
        if node not in memo:
            memo[node] = sum(self._count(v, memo) for v in self.circuit.gate(node).inputs)
        return memo[node]

    def _plan(self, out: int) -> tuple[int, ...]:
        seen: dict[int, None] = {}

        def walk(node: int):
            if node < self.n:
                seen.setdefault(node)
            elif node in self.cell:
                seen.setdefault(self.cell[node])
            else:
                for v in self.circuit.gate(node).inputs:
                    walk(v)

        walk(out)
        return tuple(seen)

    @property
    def G(self) -> tuple[int, ...]:
        return self.stored

    def plan(self, i: int) -> tuple[int, ...]:
        return self._plans[i]

    def preprocess_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.uint8))
        vals = self.circuit.eval_nodes(X)
        mem = np.zeros((X.shape[0], self.n + len(self.stored)), dtype=np.uint8)
        mem[:, : self.n] = X
        for g, a in self.cell.items():
            mem[:, a] = vals[g]
        return mem

    def preprocess(self, x) -> list[int]:
        return [int(v) for v in self.preprocess_batch(x)[0]]

    def evaluate(self, i: int, words: dict[int, np.ndarray], batch: int) -> np.ndarray:
        """Answer of query ``i`` from the probed cells only."""
        memo: dict[int, np.ndarray] = {}

        def val(node: int) -> np.ndarray:
            if node < self.n:
                return words[node]
            if node in self.cell:
                return words[self.cell[node]]
            if node not in memo:
                g = self.circuit.gate(node)
                memo[node] = g.apply([val(v) for v in g.inputs], batch)
            return memo[node]

        return val(self.circuit.outputs[i])

    def answer_batch(self, i: int, mem: np.ndarray) -> np.ndarray:
        words = {a: mem[:, a] for a in self._plans[i]}
        return self.evaluate(i, words, mem.shape[0])

    def query(self, i: int):
        words = {}
        for a in self._plans[i]:
            words[a] = np.array([(yield a)], dtype=np.uint8)
        return int(self.evaluate(i, words, 1)[0])


def translate_circuit(c: Circuit, r: int) -> CircuitDS:
    """Space ``n + r``, non-adaptive query cost at most ``(l/r)^d``.

    Gates with fan-in strictly above ``l/r`` are stored (fewer than ``r`` of
    them since fan-ins sum to ``l``); any other gate is resolved by recursing
    into its at most ``l/r`` inputs.  Requires ``1 <= r <= l``.
    """
    if r < 1:
        raise ContractError("r must be a positive integer")
    if c.wires and r > c.wires:
        raise ContractError(f"r = {r} exceeds the wire count {c.wires}")
    return CircuitDS(c, int(r))


viola_translate = translate_circuit


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

_GATE_RE = re.compile(r"(\w+)=(\S*)")


def dumps_circuit(c: Circuit) -> str:
    lines = ["circuit v1", f"inputs {c.n_inputs}"]
    for gid, g in enumerate(c.gates, start=c.n_inputs):
        parts = [f"gate {gid}", f"level={c.levels[gid]}", f"kind={g.kind}", "in=" + ",".join(map(str, g.inputs))]
        if g.kind == "table":
            parts.append(f"table={g.param:x}")
        elif g.kind in ("threshold", "const"):
            parts.append(f"param={g.param}")
        lines.append(" ".join(parts))
    lines.append("outputs " + " ".join(map(str, c.outputs)))
    return "\n".join(lines) + "\n"


def loads_circuit(text: str) -> Circuit:
    """Parse the text format; errors carry 1-based line and column."""
    n = None
    gates: dict[int, tuple[Gate, int | None, int]] = {}
    outputs = None
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        head, _, rest = line.strip().partition(" ")
        if head == "circuit":
            if rest.strip() != "v1":
                raise CircuitParseError(lineno, col + len(head) + 1, f"unsupported version {rest.strip()!r}")
        elif head == "inputs":
            try:
                n = int(rest)
            except ValueError:
                raise CircuitParseError(lineno, col + len(head) + 1, f"bad input count {rest.strip()!r}") from None
        elif head == "gate":
            gid_s, _, attrs = rest.partition(" ")
            try:
                gid = int(gid_s)
            except ValueError:
                raise CircuitParseError(lineno, col + 5, f"bad gate id {gid_s!r}") from None
            fields = {}
            for m in _GATE_RE.finditer(attrs):
                fields[m.group(1)] = (m.group(2), col + 5 + len(gid_s) + 1 + m.start())
            if "kind" not in fields:
                raise CircuitParseError(lineno, col, "gate without kind=")
            try:
                ins = tuple(int(v) for v in fields.get("in", ("", 0))[0].split(",") if v)
            except ValueError:
                raise CircuitParseError(lineno, fields["in"][1], "in= must be comma-separated node ids") from None
            kind = fields["kind"][0]
            try:
                if "table" in fields:
                    param = int(fields["table"][0], 16)
                else:
                    param = int(fields.get("param", ("0", 0))[0])
                level = int(fields["level"][0]) if "level" in fields else None
                gate = Gate(kind, ins, param)
            except (ValueError, ContractError) as exc:
                raise CircuitParseError(lineno, fields["kind"][1], str(exc)) from None
            if gid in gates:
                raise CircuitParseError(lineno, col + 5, f"duplicate gate id {gid}")
            gates[gid] = (gate, level, lineno)
        elif head == "outputs":
            try:
                outputs = tuple(int(v) for v in rest.split())
            except ValueError:
                raise CircuitParseError(lineno, col + len(head) + 1, "outputs must be node ids") from None
        else:
            raise CircuitParseError(lineno, col, f"unknown directive {head!r}")
    if n is None:
        raise CircuitParseError(max(lineno, 1), 1, "missing 'inputs' line")
    if outputs is None:
        raise CircuitParseError(max(lineno, 1), 1, "missing 'outputs' line")
    ids = sorted(gates)
    if ids != list(range(n, n + len(ids))):
        raise CircuitParseError(gates[ids[0]][2] if ids else 1, 1, "gate ids must be n, n+1, ... without gaps")
    for g in ids:
        gate, _, ln = gates[g]
        for v in gate.inputs:
            if not 0 <= v < n + len(ids):
                raise CircuitParseError(ln, 1, f"gate {g} reads undefined node {v}")
    try:
        c = Circuit(n, tuple(gates[g][0] for g in ids), outputs)
    except CircuitCycleError as exc:
        raise CircuitParseError(gates[exc.nodes[0]][2], 1, str(exc)) from None
    except ContractError as exc:
        raise CircuitParseError(max(lineno, 1), 1, str(exc)) from None
    for g in ids:
        gate, level, ln = gates[g]
        if level is not None and level != c.levels[g]:
            raise CircuitParseError(ln, 1, f"gate {g} declares level {level}, computed {c.levels[g]}")
    return c
