"""Number-on-forehead protocol models, reductions and exact transcript statistics.

Players and what they may look at:

* Charlie sees all sets and ``T``; he sends advice ``U`` to Bob (and, in the
  modified four-party model, ``U'`` to Megan).  He never sees the index.
* Megan sees all sets and ``i`` (plus ``U'`` in the modified model) and
  broadcasts one message.
* Alice sees ``S_i``, ``i``, Megan's message and the transcript so far.
* Bob sees ``T``, ``i``, ``U``, Megan's message and the transcript so far.

Alice speaks on odd rounds, Bob on even rounds.  A message flagged ``last``
ends the protocol and its final bit is the answer.  Message functions are
plain callables that receive the whole :class:`Context`; what they are
allowed to read is declared per model and checked by counterfactual
resampling in :func:`visibility_audit`.

The 1.5-round model is different: Bob forwards ``U' = forward(U)`` to Alice,
who sees every set, ``i`` and ``U'`` and sends one message; Bob then answers.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .cellprobe import (
    LAYER_DELTA,
    LAYER_M,
    DataStructureSpec,
    Memory,
    QueryContext,
    enforce_semi_adaptive,
    prepare,
    run_multiphase,
)
from .core import ContractError, MultiphaseInstance, default_word_size, disj, hard_gamma, sample_hard_instance
from .info import TOL, JointTable, entropy, mutual_information

__all__ = [
    "THREE_PARTY",
    "FOUR_PARTY",
    "FOUR_PARTY_MODIFIED",
    "ONE_POINT_FIVE",
    "ProtocolCostError",
    "VisibilityError",
    "EnumerationTooLarge",
    "Msg",
    "Context",
    "ProtocolSpec",
    "Transcript",
    "run_protocol",
    "run_all",
    "dumps_transcript",
    "AuditViolation",
    "AuditReport",
    "visibility_audit",
    "ds_to_4party",
    "reduction_check",
    "static_ds_to_3round",
    "ProtocolEnumeration",
    "protocol_joint_distribution",
    "GoodqReport",
    "verify_goodq_bounds",
    "nonadaptive_identity",
    "verify_round_elimination",
    "simulate_one_point_five",
    "one_point_five_check",
    "registered_protocols",
    "one_point_five_protocols",
]

THREE_PARTY = "three-party-restricted"
FOUR_PARTY = "four-party"
FOUR_PARTY_MODIFIED = "four-party-modified"
ONE_POINT_FIVE = "one-point-five-round"
MODELS = (THREE_PARTY, FOUR_PARTY, FOUR_PARTY_MODIFIED, ONE_POINT_FIVE)


class ProtocolCostError(RuntimeError):
    pass


class VisibilityError(RuntimeError):
    pass


class EnumerationTooLarge(ContractError):
    pass


@dataclass(frozen=True)
class Msg:
    bits: str
    last: bool = False

    def __post_init__(self):
        if any(c not in "01" for c in self.bits):
            raise ContractError(f"message {self.bits!r} is not a bit-string")
        if self.last and not self.bits:
            raise ContractError("the final message must carry the answer bit")


@dataclass(frozen=True)
class Context:
    sets: np.ndarray
    t: np.ndarray
    i: int
    u: str = ""
    u_prime: str = ""
    megan: str = ""
    history: tuple[str, ...] = ()

    @property
    def s_i(self) -> np.ndarray:
        return self.sets[self.i]

    @property
    def n(self) -> int:
        return self.sets.shape[1]

    @property
    def k(self) -> int:
        return self.sets.shape[0]


def _silent(ctx: Context) -> str:
    return ""


@dataclass(frozen=True)
class ProtocolSpec:
    """Message functions of one protocol, plus optional bit budgets."""

    name: str
    model: str
    alice: Callable[[Context], Msg]
    bob: Callable[[Context], Msg]
    charlie: Callable[[Context], str] = _silent
    megan: Callable[[Context], str] = _silent
    charlie_to_megan: Callable[[Context], str] | None = None
    forward: Callable[[Context], str] | None = None
    max_pi: int | None = None
    max_u: int | None = None
    max_rounds: int = 256
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ContractError(f"unknown model {self.model!r}")
        if self.model == FOUR_PARTY_MODIFIED and self.charlie_to_megan is None:
            raise ContractError("the modified four-party model needs charlie_to_megan")
        if self.model == ONE_POINT_FIVE and self.forward is None:
            raise ContractError("a 1.5-round protocol needs a forward function")
        if self.model == THREE_PARTY and self.megan is not _silent:
            raise ContractError("the three-party model has no Megan")

    def roles(self) -> list[str]:
        out = ["charlie"]
        if self.model == FOUR_PARTY_MODIFIED:
            out.append("charlie_to_megan")
        if self.model == ONE_POINT_FIVE:
            out.append("forward")
        if self.model in (FOUR_PARTY, FOUR_PARTY_MODIFIED):
            out.append("megan")
        return out + ["alice", "bob"]


# declared inputs, per model and role
_VISIBLE = {
    "charlie": {"sets", "t"},
    "charlie_to_megan": {"sets", "t"},
    "forward": {"u"},
    "megan": {"sets", "i"},
    "alice": {"s_i", "i"},
    "bob": {"t", "i", "u"},
}


def visible_inputs(model: str, role: str) -> set[str]:
    vis = set(_VISIBLE[role])
    if role == "megan" and model == FOUR_PARTY_MODIFIED:
        vis.add("u_prime")
    if role == "alice" and model == ONE_POINT_FIVE:
        vis = {"sets", "i", "u_prime"}
    return vis


@dataclass
class Transcript:
    protocol: str
    i: int
    u: str
    u_prime: str
    megan: str
    rounds: list[str]
    answer: int

    @property
    def pi_bits(self) -> int:
        """|Pi_i| = |Megan's message| + total round lengths (answer bit included)."""
        return len(self.megan) + sum(len(r) for r in self.rounds)

    @property
    def key(self) -> str:
        return self.megan + "|" + "/".join(self.rounds)

    def prefix(self, tau: int) -> tuple[str, ...]:
        return tuple(self.rounds[: tau - 1])


def _ctx(inst_or_ctx, i=None) -> Context:
    if isinstance(inst_or_ctx, Context):
        return inst_or_ctx
    inst = inst_or_ctx
    sets = inst.sets
    t = inst.t
    return Context(sets, t, int(i))


def _pre_round(proto: ProtocolSpec, ctx: Context, u: str | None = None) -> Context:
    if u is None:
        u = proto.charlie(replace(ctx))
    ctx = replace(ctx, u=u)
    if proto.model == FOUR_PARTY_MODIFIED:
        ctx = replace(ctx, u_prime=proto.charlie_to_megan(ctx))
    elif proto.model == ONE_POINT_FIVE:
        ctx = replace(ctx, u_prime=proto.forward(ctx))
    if proto.model in (FOUR_PARTY, FOUR_PARTY_MODIFIED):
        ctx = replace(ctx, megan=proto.megan(ctx))
    return ctx


def _play(proto: ProtocolSpec, ctx: Context) -> Transcript:
    rounds: list[str] = []
    answer = None
    for tau in range(1, proto.max_rounds + 1):
        speaker = proto.alice if tau % 2 else proto.bob
        msg = speaker(replace(ctx, history=tuple(rounds)))
        if not isinstance(msg, Msg):
            raise ContractError(f"round {tau} returned {msg!r}, expected Msg")
        rounds.append(msg.bits)
        if msg.last:
            answer = int(msg.bits[-1])
            break
        if proto.model == ONE_POINT_FIVE and tau == 2:
            raise ContractError("a 1.5-round protocol ends with Bob's answer in round 2")
    if answer is None:
        raise ProtocolCostError(f"{proto.name}: no answer within {proto.max_rounds} rounds")
    tr = Transcript(proto.name, ctx.i, ctx.u, ctx.u_prime, ctx.megan, rounds, answer)
    if proto.max_pi is not None and tr.pi_bits > proto.max_pi:
        raise ProtocolCostError(f"{proto.name}: |Pi_{ctx.i}| = {tr.pi_bits} exceeds {proto.max_pi}")
    if proto.max_u is not None and len(ctx.u) > proto.max_u:
        raise ProtocolCostError(f"{proto.name}: |U| = {len(ctx.u)} exceeds {proto.max_u}")
    return tr


def run_protocol(proto: ProtocolSpec, inst: MultiphaseInstance, i: int) -> Transcript:
    if not 0 <= i < inst.k:
        raise ContractError(f"index {i} outside [0, {inst.k})")
    return _play(proto, _pre_round(proto, _ctx(inst, i)))


def run_all(proto: ProtocolSpec, inst: MultiphaseInstance) -> list[Transcript]:
    """Transcripts for every index, computing Charlie's advice once."""
    u = proto.charlie(Context(inst.sets, inst.t, 0))
    return [_play(proto, _pre_round(proto, Context(inst.sets, inst.t, i), u)) for i in range(inst.k)]


def dumps_transcript(tr: Transcript) -> str:
    def hexed(bits: str) -> str:
        if not bits:
            return "-"
        return format(int(bits[::-1], 2), "x")

    lines = [f"protocol = {tr.protocol}", f"i = {tr.i}"]
    lines.append(f"U = {len(tr.u)}:{hexed(tr.u)}")
    lines.append(f"U' = {len(tr.u_prime)}:{hexed(tr.u_prime)}")
    lines.append(f"megan = {len(tr.megan)}:{hexed(tr.megan)}")
    for tau, r in enumerate(tr.rounds, 1):
        who = "alice" if tau % 2 else "bob"
        lines.append(f"round {tau} {who} = {len(r)}:{hexed(r)}")
    lines.append(f"answer = {tr.answer}")
    lines.append(f"pi_bits = {tr.pi_bits}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# visibility audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditViolation:
    party: str
    round: int          # 0 for messages sent before the Alice/Bob rounds
    trial: int
    seed: int
    diff_pos: int       # first differing bit (or the shorter length)
    hidden: str


@dataclass
class AuditReport:
    protocol: str
    trials: int
    checks: int = 0
    violations: list[AuditViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> AuditViolation | None:
        return self.violations[0] if self.violations else None

    def to_text(self) -> str:
        lines = [f"protocol = {self.protocol}", f"trials = {self.trials}", f"checks = {self.checks}"]
        for v in self.violations:
            lines.append(f"violation party={v.party} round={v.round} trial={v.trial} seed={v.seed} diff={v.diff_pos} hidden={v.hidden}")
        return "\n".join(lines) + "\n"


def _first_diff(a: str, b: str) -> int:
    for pos, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return pos
    return min(len(a), len(b))


def _resample(ctx: Context, visible: set[str], rng: np.random.Generator) -> tuple[Context, str]:
    sets = ctx.sets
    hidden = []
    if "sets" not in visible:
        fresh = rng.integers(0, 2, size=sets.shape, dtype=np.uint8)
        if "s_i" in visible:
            fresh[ctx.i] = sets[ctx.i]
            hidden.append("S_-i")
        else:
            hidden.append("S")
        sets = fresh
    t = ctx.t
    if "t" not in visible:
        t = rng.integers(0, 2, size=ctx.t.shape, dtype=np.uint8)
        hidden.append("T")
    i = ctx.i
    if "i" not in visible and ctx.k > 1:
        i = int((ctx.i + rng.integers(1, ctx.k)) % ctx.k)
        hidden.append("i")
    u, up = ctx.u, ctx.u_prime
    if "u" not in visible and u:
        u = "".join(rng.choice(["0", "1"], size=len(u)))
        hidden.append("U")
    if "u_prime" not in visible and up:
        up = "".join(rng.choice(["0", "1"], size=len(up)))
        hidden.append("U'")
    return replace(ctx, sets=sets, t=t, i=i, u=u, u_prime=up), "+".join(hidden)


def _message(proto: ProtocolSpec, role: str, ctx: Context) -> str:
    fn = getattr(proto, role)
    out = fn(ctx)
    return out.bits if isinstance(out, Msg) else out


def visibility_audit(proto: ProtocolSpec, inst: MultiphaseInstance, i: int, trials: int, seed: int) -> AuditReport:
    """Counterfactual check that every message depends only on declared inputs.

    For each message of the real run, hidden inputs are replaced by uniform
    random ones (or a different index) while declared inputs, Megan's
    message and the transcript prefix stay fixed; the recomputed message must
    be bit-identical.
    """
    if trials < 1:
        raise ContractError("trials must be positive")
    report = AuditReport(proto.name, trials)
    base = Context(inst.sets, inst.t, int(i))
    full = _pre_round(proto, base)
    tr = _play(proto, full)
    checks: list[tuple[str, int, Context]] = []
    for role in proto.roles():
        if role in ("alice", "bob"):
            continue
        ctx = base
        if role != "charlie":
            ctx = replace(base, u=full.u)
        if role == "megan":
            ctx = replace(ctx, u_prime=full.u_prime)
        checks.append((role, 0, ctx))
    for tau in range(1, len(tr.rounds) + 1):
        role = "alice" if tau % 2 else "bob"
        checks.append((role, tau, replace(full, history=tuple(tr.rounds[: tau - 1]))))
    for code, (role, tau, ctx) in enumerate(checks):
        visible = visible_inputs(proto.model, role)
        reference = _message(proto, role, ctx)
        for trial in range(trials):
            trial_seed = int(np.random.SeedSequence([seed, code, tau, trial]).generate_state(1)[0])
            cf, hidden = _resample(ctx, visible, np.random.default_rng(trial_seed))
            report.checks += 1
            try:
                got = _message(proto, role, cf)
            except Exception as exc:   # a crash under resampling is also a dependence
                report.violations.append(AuditViolation(role, tau, trial, trial_seed, -1, f"{hidden} ({type(exc).__name__})"))
                break
            if got != reference:
                report.violations.append(AuditViolation(role, tau, trial, trial_seed, _first_diff(got, reference), hidden))
                break
    return report


# ---------------------------------------------------------------------------
# data structure -> protocol
# ---------------------------------------------------------------------------

def _ubits(value: int, width: int) -> str:
    return "".join("1" if (value >> b) & 1 else "0" for b in range(width))


def _uint(bits: str) -> int:
    return sum(1 << b for b, c in enumerate(bits) if c == "1")


def _pairs(bits: str, w: int) -> list[tuple[int, int]]:
    return [(_uint(bits[q : q + w]), _uint(bits[q + w : q + 2 * w])) for q in range(0, len(bits), 2 * w)]


def ds_to_4party(ds: DataStructureSpec, n: int, k: int, w: int | None = None, certify: int = 32, seed: int = 0) -> ProtocolSpec:
    """Four-party protocol simulating a semi-adaptive data structure.

    ``U`` lists the update's writes as (address, content) pairs, Megan
    broadcasts the query's M-layer probes as (address, content) pairs, Alice
    sends each Delta-layer address, Bob replies ``1`` plus the word or ``0``
    for an unwritten cell, and Alice's last message is the answer bit.
    Construction is refused unless ``certify`` seeded runs pass the
    semi-adaptive check and addresses fit in ``w`` bits.
    """
    w = w or default_word_size(n, k)
    if ds.address_bits is not None and ds.address_bits(n, k, w) > w:
        raise ContractError(f"{ds.name}: addresses need {ds.address_bits(n, k, w)} bits, word size is {w}")
    for r in range(certify):
        inst = sample_hard_instance(n, k, seed + r, gamma=0.5)
        run = run_multiphase(ds, inst, w=w)
        for q, log in zip(run.queries, run.logs):
            v = enforce_semi_adaptive(log, run.budgets)
            if not v:
                raise ContractError(f"{ds.name} is not semi-adaptive: {v.reason} (seed {seed + r}, query {q})")

    def memory_after_phase_one(sets: np.ndarray) -> Memory:
        mem = Memory(w)
        ds.preprocess(sets, mem, n, k, w)
        return mem

    def charlie(ctx: Context) -> str:
        inst = MultiphaseInstance(n, k, ctx.sets, ctx.t, 0.5)
        mem = prepare(ds, inst, w)
        return "".join(_ubits(a, w) + _ubits(v, w) for a, v in mem.log.writes("II"))

    def megan(ctx: Context) -> str:
        cells = memory_after_phase_one(ctx.sets).cells
        gen = ds.query(QueryContext(ctx.i, ctx.s_i.copy(), n, k, w))
        out = []
        try:
            probe = next(gen)
            while probe.layer == LAYER_M:
                word = cells.get(int(probe.address), 0)
                out.append(_ubits(probe.address, w) + _ubits(word, w))
                probe = gen.send(word)
        except StopIteration:
            pass
        gen.close()
        return "".join(out)

    def alice(ctx: Context) -> Msg:
        m_pairs = _pairs(ctx.megan, w)
        replies = list(ctx.history[1::2])
        gen = ds.query(QueryContext(ctx.i, ctx.s_i.copy(), n, k, w))
        m_idx = d_idx = 0
        try:
            probe = next(gen)
            while True:
                if probe.layer == LAYER_M:
                    if m_idx >= len(m_pairs) or m_pairs[m_idx][0] != probe.address:
                        raise ContractError(f"{ds.name}: M probe not covered by Megan's message")
                    word = m_pairs[m_idx][1]
                    m_idx += 1
                elif probe.layer == LAYER_DELTA:
                    if d_idx == len(replies):
                        gen.close()
                        return Msg(_ubits(probe.address, w))
                    rep = replies[d_idx]
                    word = None if rep == "0" else _uint(rep[1:])
                    d_idx += 1
                else:
                    raise ContractError(f"unknown layer {probe.layer!r}")
                probe = gen.send(word)
        except StopIteration as stop:
            value = stop.value
        answer = value[0] if isinstance(value, tuple) else value
        return Msg(str(int(answer)), last=True)

    def bob(ctx: Context) -> Msg:
        delta = dict(_pairs(ctx.u, w))
        addr = _uint(ctx.history[-1])
        word = delta.get(addr)
        return Msg("0" if word is None else "1" + _ubits(word, w))

    return ProtocolSpec(
        f"ds_to_4party({ds.name})", FOUR_PARTY, alice, bob, charlie=charlie, megan=megan,
        meta={"ds": ds, "n": n, "k": k, "w": w},
    )


@dataclass
class ReductionRecord:
    i: int
    ds_answer: int
    protocol_answer: int
    tq: int
    pi_bits: int
    u_bits: int
    t_u: int

    def pi_ok(self, w: int) -> bool:
        # the final answer bit is not a probe; see the decisions ledger
        return self.pi_bits - 1 <= 4 * self.tq * w

    def u_ok(self, n: int, w: int) -> bool:
        return self.u_bits <= self.t_u * n * w


def reduction_check(proto: ProtocolSpec, inst: MultiphaseInstance) -> list[ReductionRecord]:
    """Run the data structure and its protocol side by side on every index."""
    ds, w = proto.meta["ds"], proto.meta["w"]
    run = run_multiphase(ds, inst, w=w, check=False)
    out = []
    for tr, ans, log in zip(run_all(proto, inst), run.answers, run.logs):
        out.append(ReductionRecord(tr.i, ans, tr.answer, log.tq, tr.pi_bits, len(tr.u), run.budgets.t_u))
    return out


def static_ds_to_3round(sds, trials: int = 64, seed: int = 0) -> ProtocolSpec:
    """Three-party protocol for a non-adaptive static data structure.

    ``U`` is the memory image, Alice sends all probe addresses at once and Bob
    returns their contents followed by the answer bit.  The sets of the game
    are the rows hard-wired into ``sds``; the update ``T`` is the static input.
    Refused when probe addresses depend on the memory contents.
    """
    rng = np.random.default_rng(seed)
    abits = max(0, (sds.s - 1).bit_length())
    w = sds.w

    def addresses(i: int, words) -> list[int]:
        out = []
        gen = sds.query(i)
        try:
            a = next(gen)
            while True:
                out.append(int(a))
                a = gen.send(words[a] if words is not None else 0)
        except StopIteration:
            pass
        return out

    for i in range(sds.k):
        plans = []
        for _ in range(trials):
            x = rng.integers(0, 2, size=sds.n, dtype=np.uint8)
            plans.append(addresses(i, sds.preprocess(x)))
        plans.append(addresses(i, None))
        for plan in plans[1:]:
            if plan != plans[0]:
                pos = _first_list_diff(plan, plans[0])
                raise ContractError(f"static structure is adaptive: query {i}, probe {pos + 1}")

    def charlie(ctx):
        return "".join(_ubits(v, w) for v in sds.preprocess(ctx.t))

    def alice(ctx):
        return Msg("".join(_ubits(a, abits) for a in addresses(ctx.i, None)))

    def bob(ctx):
        words = [_uint(ctx.u[q : q + w]) for q in range(0, len(ctx.u), w)]
        plan = [_uint(ctx.history[0][q : q + abits]) for q in range(0, len(ctx.history[0]), abits)] if abits else [0] * len(addresses(ctx.i, None))
        gen = sds.query(ctx.i)
        answer = None
        try:
            a = next(gen)
            while True:
                a = gen.send(words[a])
        except StopIteration as stop:
            answer = stop.value
        return Msg("".join(_ubits(words[a], w) for a in plan) + str(int(answer)), last=True)

    return ProtocolSpec(f"static_3round({getattr(sds, 'name', 'sds')})", THREE_PARTY, alice, bob, charlie=charlie,
                        meta={"sds": sds, "address_bits": abits})


def _first_list_diff(a: list, b: list) -> int:
    for pos, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return pos
    return min(len(a), len(b))


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------

ENUM_LIMIT = 20


class ProtocolEnumeration:
    """All ``2^(n(k+1))`` inputs with their probabilities and transcripts."""

    def __init__(self, proto: ProtocolSpec, n: int, k: int, gamma: float | None = None):
        size = n * (k + 1)
        if size > ENUM_LIMIT:
            raise EnumerationTooLarge(f"n(k+1) = {size} > {ENUM_LIMIT}: would enumerate 2^{size} = {1 << size} inputs")
        self.proto, self.n, self.k = proto, n, k
        self.gamma = hard_gamma(n) if gamma is None else float(gamma)
        g = self.gamma
        self.codes = 1 << size
        self.sets_int = np.zeros((self.codes, k), dtype=np.int64)
        self.t_int = np.zeros(self.codes, dtype=np.int64)
        self.prob = np.zeros(self.codes)
        self.transcripts: list[list[Transcript]] = []
        for code in range(self.codes):
            bits = np.array([(code >> b) & 1 for b in range(size)], dtype=np.uint8).reshape(k + 1, n)
            ones = int(bits.sum())
            self.prob[code] = g**ones * (1 - g) ** (size - ones)
            self.sets_int[code] = [_row_int(bits[i]) for i in range(k)]
            self.t_int[code] = _row_int(bits[k])
            inst = MultiphaseInstance(n, k, bits[:k], bits[k], 0.5)
            self.transcripts.append(run_all(proto, inst))
        self.C = max(tr.pi_bits for trs in self.transcripts for tr in trs)
        self.u_max = max(len(trs[0].u) for trs in self.transcripts)
        self.u_prime_max = max(len(trs[0].u_prime) for trs in self.transcripts)

    def answers_correct(self) -> bool:
        for code, trs in enumerate(self.transcripts):
            t = self.t_int[code]
            for i, tr in enumerate(trs):
                if tr.answer != (0 if self.sets_int[code, i] & t else 1):
                    return False
        return True


def _row_int(bits) -> int:
    return int(sum(int(b) << j for j, b in enumerate(bits)))


FIELDS = ("S", "T", "U", "UT", "PI", "M", "ANS", "S_prev", "M_prev", "P", "ell", "SP", "MP", "Z")


class JointRecords:
    """Weighted records over every field for (input, P, ell); projected on demand."""

    def __init__(self, enum: ProtocolEnumeration, p: int, ell: int | None = None):
        k = enum.k
        if not 1 <= p <= k:
            raise ContractError(f"need 1 <= p <= k, got p={p}")
        selections = list(itertools.permutations(range(k), p))
        ells = range(p) if ell is None else [ell]
        if ell is not None and not 0 <= ell < p:
            raise ContractError(f"ell={ell} outside [0, {p})")
        w_sel = 1.0 / (len(selections) * len(ells))
        self.records: list[tuple[dict, float]] = []
        for code in range(enum.codes):
            trs = enum.transcripts[code]
            pr = enum.prob[code] * w_sel
            if pr == 0:
                continue
            s = enum.sets_int[code]
            t = int(enum.t_int[code])
            u = trs[0].u
            for P in selections:
                for l in ells:
                    tgt = P[l]
                    rec = {
                        "S": int(s[tgt]),
                        "T": t,
                        "U": u,
                        "UT": (u, t),
                        "PI": trs[tgt].key,
                        "M": trs[tgt].megan,
                        "ANS": trs[tgt].answer,
                        "S_prev": tuple(int(s[q]) for q in P[:l]),
                        "M_prev": tuple(trs[q].megan for q in P[:l]),
                        "P": P,
                        "ell": l,
                        "SP": tuple(int(s[q]) for q in P),
                        "MP": tuple(trs[q].megan for q in P),
                    }
                    rec["Z"] = (rec["PI"], rec["S_prev"], rec["M_prev"], P, l)
                    self.records.append((rec, pr))

    def table(self, fields: Sequence[str]) -> JointTable:
        for f in fields:
            if f not in FIELDS:
                raise ContractError(f"unknown field {f!r}; choose from {FIELDS}")
        ids: list[dict] = [dict() for _ in fields]
        acc: dict[tuple, float] = {}
        for rec, pr in self.records:
            key = tuple(ids[c].setdefault(rec[f], len(ids[c])) for c, f in enumerate(fields))
            acc[key] = acc.get(key, 0.0) + pr
        sizes = [max(1, len(d)) for d in ids]
        probs = np.zeros(sizes)
        for key, pr in acc.items():
            probs[key] += pr
        probs /= probs.sum()
        return JointTable(tuple(fields), probs)


def protocol_joint_distribution(proto: ProtocolSpec, n: int, k: int, p: int, fields: Sequence[str] = ("S", "T", "Z"),
                                ell: int | None = None, gamma: float | None = None,
                                enum: ProtocolEnumeration | None = None) -> JointTable:
    """Exact joint distribution of the requested fields.

    Inputs are i.i.d. Bernoulli(gamma) (hard value by default), ``P`` is a
    uniform ordered p-tuple of distinct indices and ``ell`` is uniform on
    ``[p]`` unless fixed.  ``Z`` bundles (Pi_target, S_prev, M_prev, P, ell).
    """
    enum = enum or ProtocolEnumeration(proto, n, k, gamma)
    return JointRecords(enum, p, ell).table(fields)


@dataclass
class BoundCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + TOL

    @property
    def close(self) -> bool:
        return self.rhs > 0 and self.lhs >= 0.9 * self.rhs

    def line(self) -> str:
        tag = "holds" if self.holds else "VIOLATED"
        near = " (within 10% of the bound)" if self.close else ""
        return f"{self.name}: {self.lhs:.6g} <= {self.rhs:.6g} {tag}{near}"


@dataclass
class GoodqReport:
    protocol: str
    n: int
    k: int
    p: int
    gamma: float
    C: int
    u_bits: int
    u_prime_bits: int
    checks: list[BoundCheck]
    extra: dict

    @property
    def ok(self) -> bool:
        return all(c.holds for c in self.checks)

    def lines(self) -> list[str]:
        head = f"{self.protocol}: n={self.n} k={self.k} p={self.p} gamma={self.gamma:.4g} C={self.C} |U|={self.u_bits} |T|={self.n}"
        return [head] + ["  " + c.line() for c in self.checks] + [f"  {k} = {v:.6g}" for k, v in self.extra.items()]


def verify_goodq_bounds(proto: ProtocolSpec, n: int, k: int, p: int, gamma: float | None = None,
                        audit_trials: int = 20, seed: int = 0, enum: ProtocolEnumeration | None = None) -> GoodqReport:
    """Exact check of the four information bounds on Z = (Pi_target, S_prev, M_prev, P, ell).

    (a) I(S; S_prev M_prev T P ell) <= pC/(k-p)
    (b) I(Z; T) <= C  (C + |U'| in the modified model)
    (c) I(Z T; S) <= C + pC/(k-p)
    (d) I(S; T | Z) <= I(S M; U T | S_prev M_prev P ell) <= (|U| + n)/p

    ``C`` is the largest |Pi_i| over all inputs, answer bit included.
    """
    if p >= k:
        raise ContractError("need p < k")
    rng = np.random.default_rng(seed)
    for trial in range(3):
        inst = sample_hard_instance(n, k, seed + trial, gamma=0.5)
        rep = visibility_audit(proto, inst, int(rng.integers(k)), audit_trials, seed + trial)
        if not rep.ok:
            v = rep.first
            raise VisibilityError(f"{proto.name}: audit failed for {v.party} at round {v.round} (hidden {v.hidden})")
    enum = enum or ProtocolEnumeration(proto, n, k, gamma)
    rec = JointRecords(enum, p)
    C, ub, upb = enum.C, enum.u_max, enum.u_prime_max
    path = p * C / (k - p)

    J = rec.table(("S", "S_prev", "M_prev", "T", "P", "ell"))
    a_with_t = mutual_information(J, "S", ("S_prev", "M_prev", "T", "P", "ell"))
    a_without_t = mutual_information(J, "S", ("S_prev", "M_prev", "P", "ell"))

    J = rec.table(("Z", "T", "S"))
    b = mutual_information(J, "Z", "T")
    c = mutual_information(J, ("Z", "T"), "S")
    d = mutual_information(J, "S", "T", "Z")

    J = rec.table(("S", "M", "UT", "S_prev", "M_prev", "P", "ell"))
    inter = mutual_information(J, ("S", "M"), "UT", ("S_prev", "M_prev", "P", "ell"))

    b_rhs = C + (upb if proto.model == FOUR_PARTY_MODIFIED else 0)
    checks = [
        BoundCheck("(a) I(S;S_prev M_prev T P ell) <= pC/(k-p)", a_with_t, path),
        BoundCheck("(b) I(Z;T) <= C" + (" + |U'|" if proto.model == FOUR_PARTY_MODIFIED else ""), b, b_rhs),
        BoundCheck("(c) I(Z T;S) <= C + pC/(k-p)", c, C + path),
        BoundCheck("(d) I(S;T|Z) <= I(S M;U T|S_prev M_prev P ell)", d, inter),
        BoundCheck("(d) I(S M;U T|S_prev M_prev P ell) <= (|U|+n)/p", inter, (ub + n) / p),
    ]
    extra = {"I(S;S_prev M_prev P ell) [without T]": a_without_t}
    return GoodqReport(proto.name, n, k, p, enum.gamma, C, ub, upb, checks, extra)


def nonadaptive_identity(proto: ProtocolSpec, n: int, k: int, p: int, gamma: float | None = None,
                         enum: ProtocolEnumeration | None = None) -> float:
    """max over ordered p-tuples P of I(T; S_P Pi^M_P)."""
    enum = enum or ProtocolEnumeration(proto, n, k, gamma)
    worst = 0.0
    for P in itertools.permutations(range(k), p):
        acc: dict = {}
        for code in range(enum.codes):
            trs = enum.transcripts[code]
            key = (int(enum.t_int[code]), tuple(int(enum.sets_int[code, q]) for q in P), tuple(trs[q].megan for q in P))
            acc[key] = acc.get(key, 0.0) + enum.prob[code]
        J = JointTable.from_records(("T", "SM"), *_compact(acc))
        worst = max(worst, abs(mutual_information(J, "T", "SM")))
    return worst


def _compact(acc: dict) -> tuple[list[int], list]:
    t_ids: dict = {}
    o_ids: dict = {}
    recs = []
    for (t, *rest), pr in acc.items():
        recs.append(((t_ids.setdefault(t, len(t_ids)), o_ids.setdefault(tuple(rest), len(o_ids))), pr))
    return [len(t_ids), len(o_ids)], recs


def verify_round_elimination(enum: ProtocolEnumeration) -> dict:
    """Largest H(Pi^tau | speaker's declared inputs, Megan, prefix) over i and tau.

    Alice rounds condition on (S_i, Pi^M_i, Pi^<tau); Bob rounds on
    (U, T, Pi^M_i, Pi^<tau).  Both are zero for a protocol obeying its model.
    """
    worst = {"alice": 0.0, "bob": 0.0}
    rounds = max(len(tr.rounds) for trs in enum.transcripts for tr in trs)
    for i in range(enum.k):
        for tau in range(1, rounds + 1):
            role = "alice" if tau % 2 else "bob"
            acc: dict = {}
            for code in range(enum.codes):
                tr = enum.transcripts[code][i]
                if role == "alice":
                    given = (int(enum.sets_int[code, i]), tr.megan, tr.prefix(tau))
                else:
                    given = (tr.u, int(enum.t_int[code]), tr.megan, tr.prefix(tau))
                msg = tr.rounds[tau - 1] if tau <= len(tr.rounds) else None
                acc[(given, msg)] = acc.get((given, msg), 0.0) + enum.prob[code]
            g_ids: dict = {}
            m_ids: dict = {}
            recs = [((g_ids.setdefault(g, len(g_ids)), m_ids.setdefault(m, len(m_ids))), pr) for (g, m), pr in acc.items()]
            J = JointTable.from_records(("G", "MSG"), [len(g_ids), len(m_ids)], recs)
            worst[role] = max(worst[role], entropy(J, "MSG", "G"))
    return worst


# ---------------------------------------------------------------------------
# 1.5-round protocols
# ---------------------------------------------------------------------------

def simulate_one_point_five(proto: ProtocolSpec) -> ProtocolSpec:
    """Modified four-party protocol simulating a 1.5-round one.

    Charlie sends ``U' = forward(U)`` to Megan, who plays Alice and
    broadcasts ``U'`` followed by Alice's message.  Alice stays silent; Bob
    recomputes ``U'`` from ``U`` to split Megan's message and answers.
    """
    if proto.model != ONE_POINT_FIVE:
        raise ContractError("simulate_one_point_five takes a 1.5-round protocol")

    def to_megan(ctx):
        return proto.forward(replace(ctx, u=proto.charlie(ctx)))

    def megan(ctx):
        msg = proto.alice(replace(ctx, history=()))
        return ctx.u_prime + msg.bits

    def alice(ctx):
        return Msg("")

    def bob(ctx):
        up = proto.forward(ctx)
        a_msg = ctx.megan[len(up):]
        return proto.bob(replace(ctx, u_prime="", megan="", history=(a_msg,)))

    return ProtocolSpec(f"sim({proto.name})", FOUR_PARTY_MODIFIED, alice, bob, charlie=proto.charlie,
                        megan=megan, charlie_to_megan=to_megan, meta={"source": proto})


@dataclass
class OnePointFiveReport:
    protocol: str
    inputs: int
    answers_equal: bool
    C: int
    max_megan: int

    @property
    def ok(self) -> bool:
        return self.answers_equal and self.max_megan <= 2 * self.C


def one_point_five_check(proto: ProtocolSpec, n: int, k: int) -> OnePointFiveReport:
    """Exhaustive comparison of a 1.5-round protocol and its simulation.

    ``C`` is the largest of |U'| and |Alice's message| over all inputs.
    """
    sim = simulate_one_point_five(proto)
    size = n * (k + 1)
    if size > ENUM_LIMIT:
        raise EnumerationTooLarge(f"n(k+1) = {size} > {ENUM_LIMIT}")
    same, C, mm = True, 0, 0
    for code in range(1 << size):
        bits = np.array([(code >> b) & 1 for b in range(size)], dtype=np.uint8).reshape(k + 1, n)
        inst = MultiphaseInstance(n, k, bits[:k], bits[k], 0.5)
        for a, b in zip(run_all(proto, inst), run_all(sim, inst)):
            same &= a.answer == b.answer
            C = max(C, len(a.u_prime), len(a.rounds[0]))
            mm = max(mm, len(b.megan))
    return OnePointFiveReport(proto.name, 1 << size, same, C, mm)


# ---------------------------------------------------------------------------
# registered protocols
# ---------------------------------------------------------------------------

def _bits(v: np.ndarray) -> str:
    return "".join(str(int(b)) for b in v)


def _from_bits(s: str) -> np.ndarray:
    return np.array([int(c) for c in s], dtype=np.uint8)


def _answer_from(s_bits: str, t: np.ndarray) -> Msg:
    return Msg(str(disj(_from_bits(s_bits), t)), last=True)


def megan_broadcasts_s_i() -> ProtocolSpec:
    return ProtocolSpec(
        "megan_broadcasts_S_i", FOUR_PARTY,
        alice=lambda ctx: Msg(""),
        bob=lambda ctx: _answer_from(ctx.megan, ctx.t),
        megan=lambda ctx: _bits(ctx.s_i),
    )


def megan_leaks_neighbour() -> ProtocolSpec:
    def bob(ctx):
        return _answer_from(ctx.megan[: ctx.n], ctx.t)

    return ProtocolSpec(
        "megan_leaks_neighbour", FOUR_PARTY,
        alice=lambda ctx: Msg(""),
        bob=bob,
        megan=lambda ctx: _bits(ctx.s_i) + _bits(ctx.sets[(ctx.i + 1) % ctx.k]),
    )


def advice_is_t() -> ProtocolSpec:
    """Adversarial advice: Charlie hands Bob all of T; Alice sends S_i."""
    return ProtocolSpec(
        "advice_U_eq_T", THREE_PARTY,
        alice=lambda ctx: Msg(_bits(ctx.s_i)),
        bob=lambda ctx: _answer_from(ctx.history[0], _from_bits(ctx.u)),
        charlie=lambda ctx: _bits(ctx.t),
    )


def constant_answer(bit: int = 1) -> ProtocolSpec:
    return ProtocolSpec(f"constant_{bit}", THREE_PARTY, alice=lambda ctx: Msg(str(bit), last=True), bob=lambda ctx: Msg(""))


def forwards_first_bit() -> ProtocolSpec:
    """U = T^0; Alice is silent and Bob's answer is U."""
    return ProtocolSpec(
        "forwards_first_T_bit", THREE_PARTY,
        alice=lambda ctx: Msg(""),
        bob=lambda ctx: Msg(ctx.u, last=True),
        charlie=lambda ctx: str(int(ctx.t[0])),
    )


def registered_protocols(n: int, k: int) -> list[ProtocolSpec]:
    """Protocols used for the exact information checks at toy scale."""
    from .cellprobe import ds_probe_own_bitmap, ds_store_T

    w = max(default_word_size(n, k), 3)
    return [
        ds_to_4party(ds_store_T(), n, k, w),
        ds_to_4party(ds_probe_own_bitmap(), n, k, w),
        megan_broadcasts_s_i(),
        megan_leaks_neighbour(),
        advice_is_t(),
    ]


def _onept5(name, charlie, forward, alice, bob) -> ProtocolSpec:
    return ProtocolSpec(name, ONE_POINT_FIVE, alice=alice, bob=bob, charlie=charlie, forward=forward)


def one_point_five_protocols() -> list[ProtocolSpec]:
    """Small 1.5-round protocols solving DISJ(S_i, T) exactly."""

    full_forward = _onept5(
        "forward_all_T",
        charlie=lambda ctx: _bits(ctx.t),
        forward=lambda ctx: ctx.u,
        alice=lambda ctx: Msg(str(disj(ctx.s_i, _from_bits(ctx.u_prime)))),
        bob=lambda ctx: Msg(ctx.history[0], last=True),
    )

    def half_alice(ctx):
        h = len(ctx.u_prime)
        hit = int(np.any(ctx.s_i[:h] & _from_bits(ctx.u_prime)))
        return Msg(str(hit) + _bits(ctx.s_i[h:]))

    def half_bob(ctx):
        msg = ctx.history[0]
        t = _from_bits(ctx.u)
        h = ctx.n - (len(msg) - 1)
        hit = msg[0] == "1" or bool(np.any(_from_bits(msg[1:]) & t[h:]))
        return Msg("0" if hit else "1", last=True)

    half_forward = _onept5(
        "forward_half_T",
        charlie=lambda ctx: _bits(ctx.t),
        forward=lambda ctx: ctx.u[: len(ctx.u) // 2],
        alice=half_alice,
        bob=half_bob,
    )

    nothing = _onept5(
        "forward_nothing",
        charlie=lambda ctx: _bits(ctx.t),
        forward=lambda ctx: "",
        alice=lambda ctx: Msg(_bits(ctx.s_i)),
        bob=lambda ctx: _answer_from(ctx.history[0], _from_bits(ctx.u)),
    )

    def parity_alice(ctx):
        # parity of T is useless on its own; Alice still sends S_i
        return Msg(ctx.u_prime + _bits(ctx.s_i))

    parity = _onept5(
        "forward_parity",
        charlie=lambda ctx: _bits(ctx.t),
        forward=lambda ctx: str(ctx.u.count("1") % 2),
        alice=parity_alice,
        bob=lambda ctx: _answer_from(ctx.history[0][1:], _from_bits(ctx.u)),
    )
    return [full_forward, half_forward, nothing, parity]
