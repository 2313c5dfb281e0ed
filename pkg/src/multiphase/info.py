"""Exact entropy, mutual information and KL divergence over dense joint tables.

All logarithms are base 2.  ``0 log 0 = 0``; a KL term with ``mu(x) > 0`` and
``nu(x) = 0`` makes the divergence ``math.inf``.

A table whose ``probs`` array has ``dtype=object`` and holds
:class:`fractions.Fraction` masses is evaluated with ``mpmath`` at 60 digits,
which acts as a referee when a float residual sits close to a tolerance.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import mpmath
import numpy as np

__all__ = [
    "TOL",
    "MAX_ENTRIES",
    "MAX_EXACT_ENTRIES",
    "InfoContractError",
    "ZeroMassError",
    "JointTable",
    "BernoulliPair",
    "entropy",
    "mutual_information",
    "kl",
    "bernoulli_kl",
    "binary_entropy",
    "kl_mi_identity_residual",
    "chain_rule_residual",
    "marginalize",
    "condition",
    "FactResult",
    "FactReport",
    "verify_facts",
    "bernoulli_divergence_check",
    "random_table",
    "planted_table",
    "fact_corpus",
    "dumps_table",
    "loads_table",
]

TOL = 1e-9
MAX_ENTRIES = 1 << 24
MAX_EXACT_ENTRIES = 1 << 16
_EXACT_DPS = 60


class InfoContractError(ValueError):
    pass


class ZeroMassError(InfoContractError):
    """Conditioning on an event of probability zero."""


@dataclass(frozen=True, eq=False)
class JointTable:
    """Joint distribution over named finite-alphabet variables.

    ``probs`` has one axis per variable, in the order of ``names``.
    """

    names: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        if len(set(names)) != len(names):
            raise InfoContractError(f"duplicate variable names in {names}")
        probs = np.asarray(self.probs)
        exact = probs.dtype == object
        if not exact:
            probs = probs.astype(np.float64, copy=True)
        else:
            probs = probs.copy()
        if probs.ndim != len(names):
            raise InfoContractError(f"{len(names)} names but probs has {probs.ndim} axes")
        limit = MAX_EXACT_ENTRIES if exact else MAX_ENTRIES
        if probs.size > limit:
            raise InfoContractError(f"table has {probs.size} entries, limit is {limit}")
        if exact:
            flat = [Fraction(v) for v in probs.ravel()]
            if any(v < 0 for v in flat):
                raise InfoContractError("negative mass")
            if sum(flat, Fraction(0)) != 1:
                raise InfoContractError("exact table mass is not 1")
            probs = np.array(flat, dtype=object).reshape(probs.shape)
        else:
            if not np.all(np.isfinite(probs)) or np.any(probs < 0):
                raise InfoContractError("masses must be finite and non-negative")
            total = float(probs.sum())
            if abs(total - 1.0) > TOL:
                raise InfoContractError(f"total mass {total!r} is not within {TOL} of 1")
        probs.flags.writeable = False
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "probs", probs)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(self.probs.shape)

    @property
    def exact(self) -> bool:
        return self.probs.dtype == object

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InfoContractError(f"unknown variable {name!r}; have {self.names}") from None

    def to_exact(self) -> "JointTable":
        """Exact copy; float masses are converted bit-exactly and renormalised."""
        if self.exact:
            return self
        fr = [Fraction(float(v)) for v in self.probs.ravel()]
        total = sum(fr, Fraction(0))
        arr = np.array([v / total for v in fr], dtype=object).reshape(self.sizes)
        return JointTable(self.names, arr)

    @classmethod
    def from_records(cls, names: Sequence[str], sizes: Sequence[int], records: Iterable) -> "JointTable":
        """Aggregate ``(value_tuple, mass)`` pairs into a dense table."""
        probs = np.zeros(tuple(sizes), dtype=np.float64)
        for values, mass in records:
            probs[tuple(values)] += mass
        return cls(tuple(names), probs)

    @classmethod
    def product(cls, names: Sequence[str], marginals: Sequence[Sequence[float]]) -> "JointTable":
        probs = np.ones(())
        for m in marginals:
            probs = np.multiply.outer(probs, np.asarray(m, dtype=np.float64))
        return cls(tuple(names), probs)


@dataclass(frozen=True)
class BernoulliPair:
    q: float
    p: float

    def __post_init__(self):
        if not (0.0 <= self.q <= 1.0 and 0.0 <= self.p <= 1.0):
            raise InfoContractError("Bernoulli parameters lie in [0, 1]")

    def kl(self) -> float:
        return bernoulli_kl(self.q, self.p)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _names(vs) -> tuple[str, ...]:
    if vs is None:
        return ()
    if isinstance(vs, str):
        return (vs,)
    return tuple(vs)


def _check_disjoint(J: JointTable, *groups):
    seen: set[str] = set()
    for g in groups:
        for v in g:
            J.axis(v)
            if v in seen:
                raise InfoContractError(f"variable {v!r} appears in more than one argument")
            seen.add(v)


def _marginal(J: JointTable, keep: Sequence[str]) -> np.ndarray:
    axes = [J.axis(v) for v in keep]
    drop = tuple(a for a in range(len(J.names)) if a not in axes)
    arr = J.probs.sum(axis=drop) if drop else J.probs
    if not keep:
        return np.asarray(arr).reshape(())
    # the remaining axes are in J's order; permute them into the requested order
    order = sorted(axes)
    return np.transpose(arr, [order.index(a) for a in axes])


def _grouped(J: JointTable, groups: Sequence[Sequence[str]]) -> np.ndarray:
    """Marginal with each group flattened into a single axis."""
    flat = [v for g in groups for v in g]
    arr = _marginal(J, flat)
    shape = [int(np.prod([J.sizes[J.axis(v)] for v in g], dtype=np.int64)) for g in groups]
    return np.asarray(arr).reshape(shape)


def _H_arr(arr: np.ndarray) -> float:
    if arr.dtype == object:
        with mpmath.workdps(_EXACT_DPS):
            total = mpmath.mpf(0)
            for v in arr.ravel():
                if v:
                    x = mpmath.mpf(v.numerator) / v.denominator
                    total -= x * mpmath.log(x, 2)
            return float(total)
    p = arr.ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


# ---------------------------------------------------------------------------
# information quantities
# ---------------------------------------------------------------------------

def entropy(J: JointTable, vars, given=()) -> float:
    """H(vars | given) in bits."""
    a, c = _names(vars), _names(given)
    _check_disjoint(J, a, c)
    return _H_arr(_marginal(J, a + c)) - _H_arr(_marginal(J, c))


def mutual_information(J: JointTable, A, B, C=()) -> float:
    """I(A; B | C) in bits, returned unclipped."""
    a, b, c = _names(A), _names(B), _names(C)
    _check_disjoint(J, a, b, c)
    if not a or not b:
        return 0.0
    return (
        _H_arr(_marginal(J, a + c))
        + _H_arr(_marginal(J, b + c))
        - _H_arr(_marginal(J, a + b + c))
        - _H_arr(_marginal(J, c))
    )


def kl(mu: JointTable, nu: JointTable) -> float:
    """D(mu || nu) in bits, ``math.inf`` when mu is not absolutely continuous."""
    if mu.names != nu.names or mu.sizes != nu.sizes:
        raise InfoContractError(f"signature mismatch: {mu.names}{mu.sizes} vs {nu.names}{nu.sizes}")
    return _kl_arrays(mu.probs, nu.probs)


def _kl_arrays(m: np.ndarray, v: np.ndarray) -> float:
    if m.dtype == object or v.dtype == object:
        with mpmath.workdps(_EXACT_DPS):
            total = mpmath.mpf(0)
            for x, y in zip(m.ravel(), v.ravel()):
                x, y = Fraction(x), Fraction(y)
                if x == 0:
                    continue
                if y == 0:
                    return math.inf
                total += mpmath.mpf(x.numerator) / x.denominator * mpmath.log(
                    mpmath.mpf(x.numerator * y.denominator) / (x.denominator * y.numerator), 2
                )
            return float(total)
    m = np.asarray(m, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    pos = m > 0
    if np.any(v[pos] == 0):
        return math.inf
    return float(np.sum(m[pos] * (np.log2(m[pos]) - np.log2(v[pos]))))


def bernoulli_kl(q: float, p: float) -> float:
    """D(B_q || B_p) in bits."""
    return _kl_arrays(np.array([1.0 - q, q]), np.array([1.0 - p, p]))


def binary_entropy(p: float) -> float:
    return _H_arr(np.array([p, 1.0 - p]))


def kl_mi_identity_residual(J: JointTable, A, B, C=()) -> float:
    """|I(A;B|C) - E_{B,C} D(A|_{B=b,C=c} || A|_{C=c})|.

    The expectation is evaluated term by term from conditional distributions,
    independently of the entropy route used by :func:`mutual_information`.
    """
    a, b, c = _names(A), _names(B), _names(C)
    _check_disjoint(J, a, b, c)
    P = _grouped(J, [a, b, c]).astype(np.float64)        # (|A|, |B|, |C|)
    Pbc = P.sum(axis=0)
    Pac = P.sum(axis=1)
    Pc = Pac.sum(axis=0)
    expect = 0.0
    for bi, ci in zip(*np.nonzero(Pbc)):
        post = P[:, bi, ci] / Pbc[bi, ci]
        prior = Pac[:, ci] / Pc[ci]
        expect += Pbc[bi, ci] * _kl_arrays(post, prior)
    return abs(mutual_information(J, a, b, c) - expect)


def chain_rule_residual(J: JointTable, A, B, C, D) -> float:
    """|I(AD;B|C) - I(D;B|C) - I(A;B|CD)|."""
    a, b, c, d = _names(A), _names(B), _names(C), _names(D)
    return abs(
        mutual_information(J, a + d, b, c)
        - mutual_information(J, d, b, c)
        - mutual_information(J, a, b, c + d)
    )


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------

def marginalize(J: JointTable, keep) -> JointTable:
    keep = _names(keep)
    _check_disjoint(J, keep)
    keep = tuple(v for v in J.names if v in keep)
    return JointTable(keep, _marginal(J, keep))


def condition(J: JointTable, assignment: Mapping[str, int]) -> JointTable:
    """Distribution of the remaining variables given ``assignment``."""
    idx: list = [slice(None)] * len(J.names)
    for name, value in assignment.items():
        ax = J.axis(name)
        if not 0 <= value < J.sizes[ax]:
            raise InfoContractError(f"value {value} outside alphabet of {name!r}")
        idx[ax] = value
    sub = J.probs[tuple(idx)]
    mass = sub.sum()
    if mass == 0:
        raise ZeroMassError(f"conditioning event {dict(assignment)} has zero mass")
    rest = tuple(v for v in J.names if v not in assignment)
    return JointTable(rest, np.asarray(sub / mass))


# ---------------------------------------------------------------------------
# executable facts
# ---------------------------------------------------------------------------

SATISFIED = "satisfied"
VIOLATED = "violated"
NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class FactResult:
    fact: str
    status: str
    value: float = 0.0
    detail: str = ""


@dataclass
class FactReport:
    results: list[FactResult] = field(default_factory=list)

    def __getitem__(self, fact: str) -> FactResult:
        for r in self.results:
            if r.fact == fact:
                return r
        raise KeyError(fact)

    @property
    def ok(self) -> bool:
        return all(r.status != VIOLATED for r in self.results)

    def violated(self) -> list[str]:
        return [r.fact for r in self.results if r.status == VIOLATED]


def _default_roles(names: tuple[str, ...]) -> dict[str, tuple[str, ...]]:
    if len(names) >= 4:
        return {"A": (names[0],), "B": (names[1],), "C": (names[2],), "D": tuple(names[3:])}
    if len(names) == 3:
        return {"A": (names[0],), "B": (names[1],), "C": (), "D": (names[2],)}
    return {"A": (names[0],), "B": (names[1],), "C": (), "D": ()}


def verify_facts(J: JointTable, roles: Mapping[str, Sequence[str]] | None = None, tol: float = TOL) -> FactReport:
    """Check the entropy / information facts on one table.

    ``roles`` maps ``A, B, C, D`` to variable groups; by default they are
    taken from the variable order.  Facts whose independence hypothesis fails
    are reported as not applicable.
    """
    if len(J.names) < 2:
        raise InfoContractError("verify_facts needs at least two variables")
    r = {k: _names(v) for k, v in (roles or _default_roles(J.names)).items()}
    A, B, C, D = r["A"], r["B"], r.get("C", ()), r.get("D", ())
    out = FactReport()

    # conditioning does not increase entropy, over every ordered pair
    worst, where = math.inf, ""
    for x, y in itertools.permutations(J.names, 2):
        gap = entropy(J, x) - entropy(J, x, y)
        if gap < worst:
            worst, where = gap, f"H({x}) - H({x}|{y})"
    out.results.append(FactResult("conditioning", SATISFIED if worst >= -tol else VIOLATED, worst, where))

    res = kl_mi_identity_residual(J, A, B, C)
    out.results.append(FactResult("kl_form", SATISFIED if res <= tol else VIOLATED, res, "KL form of I(A;B|C)"))

    if D:
        res = chain_rule_residual(J, A, B, C, D)
        out.results.append(FactResult("chain_rule", SATISFIED if res <= tol else VIOLATED, res, "I(AD;B|C) chain rule"))

        hyp = mutual_information(J, B, D, C)
        lhs, rhs = mutual_information(J, A, B, C), mutual_information(J, A, B, C + D)
        if abs(hyp) > tol:
            out.results.append(FactResult("extra_condition_up", NOT_APPLICABLE, hyp, "I(B;D|C) != 0"))
        else:
            out.results.append(FactResult("extra_condition_up", SATISFIED if lhs <= rhs + tol else VIOLATED, rhs - lhs, "I(A;B|CD) - I(A;B|C)"))

        hyp = mutual_information(J, B, D, A + C)
        if abs(hyp) > tol:
            out.results.append(FactResult("extra_condition_down", NOT_APPLICABLE, hyp, "I(B;D|AC) != 0"))
        else:
            out.results.append(FactResult("extra_condition_down", SATISFIED if lhs >= rhs - tol else VIOLATED, lhs - rhs, "I(A;B|C) - I(A;B|CD)"))
    else:
        for f in ("chain_rule", "extra_condition_up", "extra_condition_down"):
            out.results.append(FactResult(f, NOT_APPLICABLE, 0.0, "needs a fourth role"))
    return out


def bernoulli_divergence_check(p: float, constant: float = 5e-5, grid: int = 100) -> dict:
    """Numeric form of the small-divergence-implies-close-parameters fact.

    Checks D(B_{1.01p} || B_p) and D(B_{0.99p} || B_p) against ``constant * p``
    and that D(B_q || B_p) is strictly monotone in |q - p| on ``grid`` points
    on each side of p, out to the 1% band.  Together these give: divergence
    below ``constant * p`` forces q into [0.99p, 1.01p].
    """
    hi, lo = bernoulli_kl(1.01 * p, p), bernoulli_kl(0.99 * p, p)
    up = [bernoulli_kl(q, p) for q in np.linspace(p, 1.01 * p, grid)]
    down = [bernoulli_kl(q, p) for q in np.linspace(p, 0.99 * p, grid)]
    mono_up = bool(np.all(np.diff(up) > 0))
    mono_down = bool(np.all(np.diff(down) > 0))
    return {
        "p": p,
        "kl_up": hi,
        "kl_down": lo,
        "threshold": constant * p,
        "mono_up": mono_up,
        "mono_down": mono_down,
        "ok": hi >= constant * p and lo >= constant * p and mono_up and mono_down,
    }


def random_table(rng: np.random.Generator, sizes: Sequence[int], names: Sequence[str] | None = None, sparsity: float = 0.0) -> JointTable:
    """Dirichlet(1) table, optionally with a random fraction of zeroed cells."""
    sizes = tuple(int(s) for s in sizes)
    names = tuple(names) if names else tuple("ABCDEFGH"[: len(sizes)])
    p = rng.dirichlet(np.ones(int(np.prod(sizes))))
    if sparsity > 0:
        p[rng.random(p.size) < sparsity] = 0.0
        if p.sum() == 0:
            p[0] = 1.0
        p /= p.sum()
    return JointTable(names, p.reshape(sizes))


def planted_table(rng: np.random.Generator, sizes: Sequence[int], independence: str) -> JointTable:
    """Random table over (A, B, C, D) with a planted conditional independence.

    ``"B-D|C"`` factors as p(c) p(b|c) p(d|c) p(a|b,c,d); ``"B-D|AC"`` as
    p(a,c) p(b|a,c) p(d|a,c).
    """
    a, b, c, d = (int(s) for s in sizes)
    if independence == "B-D|C":
        pc = rng.dirichlet(np.ones(c))
        pb = rng.dirichlet(np.ones(b), size=c)            # [c, b]
        pd = rng.dirichlet(np.ones(d), size=c)            # [c, d]
        pa = rng.dirichlet(np.ones(a), size=(b, c, d))    # [b, c, d, a]
        P = np.einsum("c,cb,cd,bcda->abcd", pc, pb, pd, pa)
    elif independence == "B-D|AC":
        pac = rng.dirichlet(np.ones(a * c)).reshape(a, c)
        pb = rng.dirichlet(np.ones(b), size=(a, c))       # [a, c, b]
        pd = rng.dirichlet(np.ones(d), size=(a, c))       # [a, c, d]
        P = np.einsum("ac,acb,acd->abcd", pac, pb, pd)
    else:
        raise InfoContractError(f"unknown independence pattern {independence!r}")
    return JointTable(("A", "B", "C", "D"), P / P.sum())


def fact_corpus(seed: int, count: int) -> list[JointTable]:
    """Seeded mix of free tables (3-4 variables, alphabets 2-4) and planted
    conditional-independence tables, so that every fact gets exercised."""
    rng = np.random.default_rng(seed)
    out = []
    for t in range(count):
        kind = t % 3
        if kind == 0:
            nv = int(rng.integers(3, 5))
            sizes = [int(v) for v in rng.integers(2, 5, size=nv)]
            out.append(random_table(rng, sizes, sparsity=0.3 if t % 2 else 0.0))
        else:
            sizes = [int(v) for v in rng.integers(2, 5, size=4)]
            out.append(planted_table(rng, sizes, "B-D|C" if kind == 1 else "B-D|AC"))
    return out


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def dumps_table(J: JointTable) -> str:
    lines = ["# joint-table v1", "vars = " + " ".join(f"{n}:{s}" for n, s in zip(J.names, J.sizes))]
    lines.append("exact = " + ("true" if J.exact else "false"))
    for idx in itertools.product(*(range(s) for s in J.sizes)):
        v = J.probs[idx]
        lines.append(" ".join(map(str, idx)) + " " + (str(v) if J.exact else repr(float(v))))
    return "\n".join(lines) + "\n"


def loads_table(text: str) -> JointTable:
    names: list[str] = []
    sizes: list[int] = []
    exact = False
    rows: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("vars"):
            for tok in line.partition("=")[2].split():
                n, _, s = tok.partition(":")
                names.append(n)
                sizes.append(int(s))
        elif line.startswith("exact"):
            exact = line.partition("=")[2].strip() == "true"
        else:
            rows.append(line)
    probs = np.zeros(sizes, dtype=object if exact else np.float64)
    if exact:
        probs[...] = Fraction(0)
    for line in rows:
        parts = line.split()
        idx = tuple(int(v) for v in parts[:-1])
        probs[idx] = Fraction(parts[-1]) if exact else float(parts[-1])
    return JointTable(tuple(names), probs)
