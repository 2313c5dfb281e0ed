"""Random processes for two-bit AND: embedding, costs, and cut-and-paste searches.

A :class:`RandomProcess` is a kernel ``p(z | x, y)`` with inputs ``X, Y``
i.i.d. Bernoulli(gamma) and a projection ``z -> z_ans``.  :func:`embed_and`
builds one from a multi-party protocol by planting ``X`` and ``Y`` at a random
coordinate of a random set and of ``T``.  :func:`adversarial_search` looks for
kernels that are cheap in every measured sense at once, and
:func:`largediv_sweep` scans the per-symbol posterior simplex.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, hard_gamma
from .info import JointTable, bernoulli_kl, mutual_information

__all__ = [
    "RandomProcess",
    "CostProfile",
    "and_costs",
    "batch_costs",
    "check_and_contract",
    "Verdict",
    "EmbeddedProcess",
    "embed_and",
    "compare_profiles",
    "SearchResult",
    "adversarial_search",
    "SweepReport",
    "largediv_sweep",
    "ideal_process",
    "copy_process",
    "or_process",
    "embedding_bounds",
]

ERR0_LIMIT = 0.001
ERR0_SLACK = 1e-12
LN2 = math.log(2.0)


@dataclass(frozen=True)
class RandomProcess:
    kernel: np.ndarray      # shape (2, 2, |Z|): p(z | x, y)
    ans: np.ndarray         # shape (|Z|,), values in {0, 1}
    gamma: float
    labels: tuple = ()

    def __post_init__(self):
        k = np.array(self.kernel, dtype=np.float64)
        a = np.array(self.ans, dtype=np.int64)
        if k.ndim != 3 or k.shape[:2] != (2, 2):
            raise ContractError(f"kernel must have shape (2, 2, |Z|), got {k.shape}")
        if a.shape != (k.shape[2],) or np.any((a != 0) & (a != 1)):
            raise ContractError("ans must be a 0/1 vector over the Z alphabet")
        if np.any(k < 0) or np.any(np.abs(k.sum(axis=2) - 1.0) > 1e-9):
            raise ContractError("each kernel row must be a probability vector")
        if not 0.0 < self.gamma < 1.0:
            raise ContractError("gamma must lie in (0, 1)")
        k.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "ans", a)

    @property
    def z_size(self) -> int:
        return self.kernel.shape[2]

    def joint(self) -> np.ndarray:
        px = np.array([1.0 - self.gamma, self.gamma])
        return px[:, None, None] * px[None, :, None] * self.kernel

    def table(self) -> JointTable:
        return JointTable(("X", "Y", "Z"), self.joint())


@dataclass(frozen=True)
class CostProfile:
    i_zx: float
    i_zy: float
    i_xy_given_z: float
    err_and1: float
    err_and0: float
    p_ans1: float

    FIELDS = ("i_zx", "i_zy", "i_xy_given_z", "err_and1", "err_and0", "p_ans1")

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.FIELDS}


def _errors(Z: RandomProcess) -> tuple[float, float, float]:
    P = Z.joint()
    on1 = Z.ans == 1
    err1 = float(Z.kernel[1, 1, on1].sum())
    p_and0 = 1.0 - Z.gamma**2
    mass0 = float(P[..., ~on1].sum() - P[1, 1, ~on1].sum())
    return err1, mass0 / p_and0, float(P[..., on1].sum())


def and_costs(Z: RandomProcess) -> CostProfile:
    """Exact cost profile through the information engine."""
    J = Z.table()
    err1, err0, p1 = _errors(Z)
    return CostProfile(
        mutual_information(J, "Z", "X"),
        mutual_information(J, "Z", "Y"),
        mutual_information(J, "X", "Y", "Z"),
        err1,
        err0,
        p1,
    )


def _xlogx_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num * log2(num / den), zero where num == 0."""
    out = np.zeros_like(num)
    m = (num > 0) & (den > 0)
    out[m] = num[m] * (np.log2(num[m]) - np.log2(den[m]))
    return out


def batch_costs(K: np.ndarray, ans: np.ndarray, gamma: float) -> dict:
    """Vectorised cost profile for a batch of kernels of shape (B, 2, 2, Z)."""
    px = np.array([1.0 - gamma, gamma])
    P = px[None, :, None, None] * px[None, None, :, None] * K
    pz = P.sum(axis=(1, 2))
    pxz = P.sum(axis=2)
    pyz = P.sum(axis=1)
    i_zx = _xlogx_ratio(pxz, px[None, :, None] * pz[:, None, :]).sum(axis=(1, 2))
    i_zy = _xlogx_ratio(pyz, px[None, :, None] * pz[:, None, :]).sum(axis=(1, 2))
    i_xy = _xlogx_ratio(P, pxz[:, :, None, :] * pyz[:, None, :, :] / np.where(pz > 0, pz, 1.0)[:, None, None, :]).sum(axis=(1, 2, 3))
    on1 = ans == 1
    err1 = K[:, 1, 1, :][:, on1].sum(axis=1)
    mass0 = P[..., ~on1].sum(axis=(1, 2, 3)) - P[:, 1, 1, ~on1].sum(axis=1)
    return {
        "i_zx": i_zx,
        "i_zy": i_zy,
        "i_xy_given_z": i_xy,
        "err_and1": err1,
        "err_and0": mass0 / (1.0 - gamma**2),
        "p_ans1": P[..., on1].sum(axis=(1, 2, 3)),
    }


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reasons: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def check_and_contract(Z: RandomProcess) -> Verdict:
    """Zero error on AND = 1, at most 0.001 error on AND = 0, Pr[ans = 1] >= 1/2."""
    err1, err0, p1 = _errors(Z)
    reasons = []
    if err1 != 0.0:
        reasons.append(f"err_and1 = {err1!r} != 0")
    if err0 > ERR0_LIMIT + ERR0_SLACK:
        reasons.append(f"err_and0 = {err0!r} > {ERR0_LIMIT}")
    if p1 < 0.5:
        reasons.append(f"p_ans1 = {p1!r} < 1/2")
    return Verdict(not reasons, tuple(reasons))


# ---------------------------------------------------------------------------
# reference processes
# ---------------------------------------------------------------------------

def ideal_process(gamma: float) -> RandomProcess:
    """Z = (X, Y) with ans = NOT AND."""
    K = np.zeros((2, 2, 4))
    for x, y in itertools.product((0, 1), repeat=2):
        K[x, y, 2 * x + y] = 1.0
    return RandomProcess(K, np.array([1, 1, 1, 0]), gamma)


def copy_process(gamma: float) -> RandomProcess:
    K = np.zeros((2, 2, 2))
    K[0, :, 0] = 1.0
    K[1, :, 1] = 1.0
    return RandomProcess(K, np.array([1, 0]), gamma)


def or_process(gamma: float) -> RandomProcess:
    K = np.zeros((2, 2, 2))
    for x, y in itertools.product((0, 1), repeat=2):
        K[x, y, x | y] = 1.0
    return RandomProcess(K, np.array([1, 0]), gamma)


# ---------------------------------------------------------------------------
# embedding a protocol
# ---------------------------------------------------------------------------

@dataclass
class EmbeddedProcess:
    process: RandomProcess
    profile: CostProfile
    mode: str
    samples: int = 0
    stderr: dict = field(default_factory=dict)
    labels: list = field(default_factory=list)


def _z_key(tr, sets_bits: np.ndarray, t_bits: np.ndarray, P: tuple, ell: int, j: int) -> tuple:
    s_prev = tuple(tuple(int(b) for b in sets_bits[q]) for q in P[:ell])
    # Z^DISJ = (Pi_target, S_prev, M_prev, P, ell); Z^AND adds (T^{<j}, j)
    return (tr[P[ell]].key, s_prev, tuple(tr[q].megan for q in P[:ell]), P, ell,
            tuple(int(b) for b in t_bits[:j]), j)


class _Runner:
    """Memoised transcripts keyed by the full input bit pattern."""

    def __init__(self, proto, n: int, k: int):
        from .core import MultiphaseInstance
        from .nof import run_all

        self.proto, self.n, self.k = proto, n, k
        self._inst = MultiphaseInstance
        self._run_all = run_all
        self.cache: dict[bytes, list] = {}

    def transcripts(self, bits: np.ndarray):
        key = bits.tobytes()
        if key not in self.cache:
            inst = self._inst(self.n, self.k, bits[: self.k], bits[self.k], 0.5)
            self.cache[key] = self._run_all(self.proto, inst)
        return self.cache[key]


def _kernel_from_weights(classes: list[tuple[float, list]], gamma: float) -> tuple[np.ndarray, np.ndarray, list]:
    """classes: (weight, [(z_key, ans) for x,y in 00,01,10,11])."""
    ids: dict = {}
    ans: list[int] = []
    for _, zs in classes:
        for zk, a in zs:
            if zk not in ids:
                ids[zk] = len(ids)
                ans.append(a)
    K = np.zeros((2, 2, len(ids)))
    for wgt, zs in classes:
        for (x, y), (zk, _) in zip(itertools.product((0, 1), repeat=2), zs):
            K[x, y, ids[zk]] += wgt
    K /= K.sum(axis=2, keepdims=True)
    return K, np.array(ans), list(ids)


def embed_and(proto, n: int, k: int, p: int, mode: str = "exact", N: int = 10**6, gamma: float | None = None,
              seed: int = 0, bootstrap: int = 200, proposal: float | None = 0.5) -> EmbeddedProcess:
    """Z^AND = (Pi_target, S_prev, M_prev, P, ell, T^{<j}, j) as a kernel in (X, Y).

    ``P`` is a uniform ordered p-tuple of distinct indices, ``ell`` uniform on
    ``[p]``, ``j`` uniform on ``[n]``; ``X`` is planted at ``S_{P[ell]}^j`` and
    ``Y`` at ``T^j``; every other bit is Bernoulli(gamma).  ``exact`` sums over
    everything; ``mc`` draws ``N`` copies of the non-planted randomness,
    evaluates all four (x, y) on each, and attaches bootstrap standard errors.
    In ``mc`` mode the free bits are drawn from Bernoulli(``proposal``) and
    reweighted by the likelihood ratio, so that events of mass ~gamma^2 are
    actually sampled; ``proposal=None`` samples from the true prior.
    """
    g = hard_gamma(n) if gamma is None else float(gamma)
    if not 1 <= p <= k:
        raise ContractError(f"need 1 <= p <= k, got p={p}")
    runner = _Runner(proto, n, k)
    sels = list(itertools.permutations(range(k), p))
    size = n * (k + 1)

    def evaluate(others: np.ndarray, P, ell, j):
        zs = []
        for x, y in itertools.product((0, 1), repeat=2):
            bits = others.copy()
            bits[P[ell], j] = x
            bits[k, j] = y
            tr = runner.transcripts(bits)
            zs.append((_z_key(tr, bits[:k], bits[k], P, ell, j), tr[P[ell]].answer))
        return zs

    if mode == "exact":
        from .nof import ENUM_LIMIT, EnumerationTooLarge

        if size > ENUM_LIMIT:
            raise EnumerationTooLarge(f"n(k+1) = {size} > {ENUM_LIMIT}")
        classes = []
        free = size - 2
        w_sel = 1.0 / (len(sels) * p * n)
        for P in sels:
            for ell in range(p):
                for j in range(n):
                    fixed = {P[ell] * n + j, k * n + j}
                    pos = [b for b in range(size) if b not in fixed]
                    for code in range(1 << free):
                        flat = np.zeros(size, dtype=np.uint8)
                        for r, b in enumerate(pos):
                            flat[b] = (code >> r) & 1
                        ones = int(flat.sum())
                        wgt = w_sel * g**ones * (1 - g) ** (free - ones)
                        classes.append((wgt, evaluate(flat.reshape(k + 1, n), P, ell, j)))
        K, ans, labels = _kernel_from_weights(classes, g)
        Zp = RandomProcess(K, ans, g)
        return EmbeddedProcess(Zp, and_costs(Zp), "exact", labels=labels)

    if mode not in ("mc", "monte-carlo"):
        raise ContractError(f"unknown mode {mode!r}")
    q = g if proposal is None else float(proposal)
    if not 0.0 < q < 1.0:
        raise ContractError("proposal must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    sel_idx = rng.integers(len(sels), size=N)
    ells = rng.integers(p, size=N)
    js = rng.integers(n, size=N)
    bits = (rng.random((N, size)) < q).astype(np.uint8)
    # zero the planted positions so that equal classes collide
    planted_s = np.array([sels[s][l] for s, l in zip(sel_idx, ells)]) * n + js
    bits[np.arange(N), planted_s] = 0
    bits[np.arange(N), k * n + js] = 0
    weights = (1 << np.arange(size, dtype=np.int64))
    codes = bits.astype(np.int64) @ weights
    class_id = ((codes * len(sels) + sel_idx) * p + ells) * n + js
    uniq, first, counts = np.unique(class_id, return_index=True, return_counts=True)
    # likelihood ratio of the free bits under B_g versus the proposal B_q
    ones = bits[first].sum(axis=1).astype(np.float64)
    zeros = (size - 2) - ones
    log_lr = ones * (math.log(g) - math.log(q)) + zeros * (math.log1p(-g) - math.log1p(-q))
    lr = np.exp(log_lr)
    zs_per_class = []
    for idx in first:
        P = sels[sel_idx[idx]]
        zs_per_class.append(evaluate(bits[idx].reshape(k + 1, n), P, int(ells[idx]), int(js[idx])))

    def fit(cnt):
        cl = [(c * r, zs) for c, r, zs in zip(cnt, lr, zs_per_class) if c > 0]
        Kf, af, lab = _kernel_from_weights(cl, g)
        return RandomProcess(Kf, af, g), lab

    Zp, labels = fit(counts)
    prof = and_costs(Zp)
    boot = {f: [] for f in CostProfile.FIELDS}
    for _ in range(bootstrap):
        pb = and_costs(fit(rng.multinomial(N, counts / N))[0])
        for f in CostProfile.FIELDS:
            boot[f].append(getattr(pb, f))
    se = {f: float(np.std(v, ddof=1)) for f, v in boot.items()}
    return EmbeddedProcess(Zp, prof, "mc", N, se, labels)


def compare_profiles(exact: CostProfile, mc: EmbeddedProcess, z: float = 4.0, floor: float = 1e-12) -> dict:
    """Per-field |exact - mc| <= z * SE, with an absolute floor for zero-variance fields."""
    out = {}
    for f in CostProfile.FIELDS:
        a, b = getattr(exact, f), getattr(mc.profile, f)
        tol = max(z * mc.stderr.get(f, 0.0), floor)
        out[f] = (abs(a - b) <= tol, a, b, tol)
    return out


# ---------------------------------------------------------------------------
# adversarial search
# ---------------------------------------------------------------------------

@dataclass
class SearchResult:
    feasible: bool
    process: RandomProcess | None
    profile: CostProfile | None
    gamma: float
    z_size: int
    eps: float
    restarts: int
    iterations: int
    seed: int
    feasible_restarts: int = 0
    best_restart: int | None = None
    best_violation: float = math.inf

    @property
    def ratio(self) -> float:
        return self.profile.i_zy / self.gamma if self.profile else math.nan


def _structured_inits(z: int, gamma: float, n1: int) -> list[np.ndarray]:
    inits = []
    # AND only: everything on symbol 0 (ans 1) except (1,1) on symbol n1 (ans 0)
    K = np.zeros((2, 2, z))
    K[:, :, 0] = 1.0
    K[1, 1, 0] = 0.0
    K[1, 1, n1] = 1.0
    inits.append(K)
    # Z reveals Y: rows with y=1 go to their own ans-1 symbol
    K2 = K.copy()
    if n1 >= 2:
        K2[0, 1, :] = 0.0
        K2[0, 1, 1] = 1.0
    inits.append(K2)
    # Z reveals X on the ans-1 side
    K3 = K.copy()
    if n1 >= 2:
        K3[1, 0, :] = 0.0
        K3[1, 0, 1] = 1.0
    inits.append(K3)
    # spread: uniform over the allowed symbols
    K4 = np.zeros((2, 2, z))
    K4[:, :, :n1] = 1.0 / n1
    K4[1, 1, :] = 0.0
    K4[1, 1, n1:] = 1.0 / (z - n1)
    inits.append(K4)
    return inits


def adversarial_search(gamma: float, z_size: int, eps: float, restarts: int, seed: int, iterations: int = 3000,
                       err0_limit: float = ERR0_LIMIT) -> SearchResult:
    """Minimise I(Z;Y) over AND kernels subject to the contract and small I(Z;X), I(X;Y|Z).

    Symbols ``0 .. z/2-1`` answer 1 and the rest answer 0; row (1,1) lives on
    the answer-0 symbols, so the AND = 1 error is exactly zero.  All restarts
    evolve in one batch by coordinate Dirichlet perturbations under an
    exact-penalty objective whose weight decreases over the run; the best
    feasible point (ties broken by restart index) is returned.
    """
    if not 0.0 < gamma <= 0.1:
        raise ContractError(f"gamma must lie in (0, 0.1], got {gamma}")
    if z_size < 2:
        raise ContractError("z_size must be at least 2")
    if restarts < 1:
        raise ContractError("need at least one restart")
    rng = np.random.default_rng(seed)
    n1 = max(1, z_size // 2)
    ans = np.array([1] * n1 + [0] * (z_size - n1))
    allowed = np.ones((2, 2, z_size), dtype=bool)
    allowed[1, 1, :n1] = False
    cap_x = eps * gamma
    cap_xy = eps * gamma**2

    inits = _structured_inits(z_size, gamma, n1)
    K = np.zeros((restarts, 2, 2, z_size))
    for r in range(restarts):
        if r < len(inits):
            K[r] = inits[r]
        else:
            alpha = rng.choice([0.05, 0.3, 1.0])
            raw = rng.gamma(alpha, size=(2, 2, z_size)) * allowed
            raw += 1e-300 * allowed
            K[r] = raw / raw.sum(axis=2, keepdims=True)

    def objective(K, lam):
        c = batch_costs(K, ans, gamma)
        viol = (
            np.maximum(0.0, c["i_zx"] - cap_x) / cap_x
            + np.maximum(0.0, c["i_xy_given_z"] - cap_xy) / cap_xy
            + np.maximum(0.0, c["err_and0"] - err0_limit) / err0_limit
            + np.maximum(0.0, 0.5 - c["p_ans1"]) * 2.0
        )
        return c["i_zy"] / gamma + lam * viol, viol, c

    lam_schedule = np.geomspace(1e4, 10.0, iterations)
    f, viol, costs = objective(K, lam_schedule[0])
    best_val = np.full(restarts, np.inf)
    best_K = K.copy()
    best_v = viol.copy()
    feas = viol <= 0
    best_val[feas] = costs["i_zy"][feas]
    step = np.full(restarts, 0.3)
    for it in range(iterations):
        lam = lam_schedule[it]
        f, viol, costs = objective(K, lam)
        rows = rng.integers(4, size=restarts)
        xs, ys = rows // 2, rows % 2
        cand = K.copy()
        ar = np.arange(restarts)
        cur = cand[ar, xs, ys, :]
        mask = allowed[xs, ys, :]
        conc = rng.choice([2.0, 20.0, 200.0], size=restarts)
        d = rng.gamma(np.maximum(cur * conc[:, None], 0.0) + 0.02, 1.0) * mask
        d /= d.sum(axis=1, keepdims=True)
        s = step[:, None]
        cand[ar, xs, ys, :] = (1 - s) * cur + s * d
        f2, v2, c2 = objective(cand, lam)
        acc = f2 < f
        K[acc] = cand[acc]
        step = np.where(acc, np.minimum(step * 1.3, 1.0), np.maximum(step * 0.85, 1e-6))
        cf = v2 <= 0
        better = acc & cf & (c2["i_zy"] < best_val)
        best_val[better] = c2["i_zy"][better]
        best_K[better] = cand[better]
        upd = acc & ~np.isfinite(best_val) & (v2 < best_v)
        best_v[upd] = v2[upd]
        best_K[upd] = cand[upd]

    finite = np.isfinite(best_val)
    result = SearchResult(False, None, None, gamma, z_size, eps, restarts, iterations, seed,
                          feasible_restarts=int(finite.sum()))
    # confirm with the exact engine, scanning restarts in index order
    order = sorted(range(restarts), key=lambda r: (best_val[r], r)) if finite.any() else sorted(range(restarts), key=lambda r: (best_v[r], r))
    for r in order:
        Zp = RandomProcess(best_K[r], ans, gamma)
        prof = and_costs(Zp)
        ok = (check_and_contract(Zp).ok and prof.i_zx <= cap_x and prof.i_xy_given_z <= cap_xy)
        if ok:
            result.feasible, result.process, result.profile, result.best_restart = True, Zp, prof, r
            result.best_violation = 0.0
            return result
        if not finite.any():
            result.process, result.profile, result.best_restart = Zp, prof, r
            result.best_violation = float(best_v[r])
            return result
    return result


# ---------------------------------------------------------------------------
# per-symbol simplex sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepReport:
    gamma: float
    resolution: int
    points: int
    filtered: int
    violations: int
    kappa: float
    min_kl_y_filtered: float
    focused_points: int = 0
    focused_filtered: int = 0
    focused_violations: int = 0

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.focused_violations == 0


def _kl_vec(q: np.ndarray, p: float) -> np.ndarray:
    out = np.zeros_like(q)
    a = q > 0
    out[a] += q[a] * (np.log2(q[a]) - math.log2(p))
    b = q < 1
    out[b] += (1 - q[b]) * (np.log2(1 - q[b]) - math.log2(1 - p))
    return out


def _cond_mi(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """I(X;Y) for the 2x2 table [[a, b], [c, 0]] (rows X, columns Y)."""
    px1 = c
    py1 = b
    px0, py0 = 1 - px1, 1 - py1
    total = np.zeros_like(a)
    for mass, mx, my in ((a, px0, py0), (b, px0, py1), (c, px1, py0)):
        m = mass > 0
        total[m] += mass[m] * (np.log2(mass[m]) - np.log2(mx[m] * my[m]))
    return total


def _sweep_points(b: np.ndarray, c: np.ndarray, gamma: float):
    a = 1.0 - b - c
    ok = a >= -1e-15
    a, b, c = np.maximum(a[ok], 0.0), b[ok], c[ok]
    kl_x = _kl_vec(c, gamma)
    kl_y = _kl_vec(b, gamma)
    mi = _cond_mi(a, b, c)
    filt = (kl_x <= gamma / 100) & (mi <= gamma**2 / 100)
    viol = filt & (kl_y < gamma / 100)
    pos = mi > 1e-300
    kappa = float(np.max(b[pos] * c[pos] / mi[pos])) if pos.any() else 0.0
    min_kl = float(kl_y[filt].min()) if filt.any() else math.inf
    return a.size, int(filt.sum()), int(viol.sum()), kappa, min_kl


def largediv_sweep(gamma: float, grid_resolution: int = 1000, focused: bool = True) -> SweepReport:
    """Grid over (a, b, c) = Pr[(0,0)], Pr[(0,1)], Pr[(1,0)] given z, with Pr[(1,1)] = 0.

    Every point with KL(X_z || B_gamma) <= gamma/100 and I(X;Y | Z=z) <=
    gamma^2/100 must have KL(Y_z || B_gamma) >= gamma/100.  A uniform grid
    barely touches the filtered region, so a focused grid around c = gamma
    (``c`` in [0.5 gamma, 1.5 gamma], ``b`` in [0, 2 gamma]) is swept as well.
    ``kappa`` is the largest b*c / I(X;Y | Z=z) seen on the uniform grid.
    """
    if grid_resolution < 100:
        raise ContractError("grid_resolution must be at least 100")
    r = grid_resolution
    ticks = np.arange(r + 1) / r
    B, C = np.meshgrid(ticks, ticks, indexing="ij")
    pts, filt, viol, kappa, min_kl = _sweep_points(B.ravel(), C.ravel(), gamma)
    rep = SweepReport(gamma, r, pts, filt, viol, kappa, min_kl)
    if focused:
        bt = np.linspace(0.0, 2 * gamma, r + 1)
        ct = np.linspace(0.5 * gamma, 1.5 * gamma, r + 1)
        B, C = np.meshgrid(bt, ct, indexing="ij")
        fp, ff, fv, fk, fm = _sweep_points(B.ravel(), C.ravel(), gamma)
        rep.focused_points, rep.focused_filtered, rep.focused_violations = fp, ff, fv
        rep.kappa = max(rep.kappa, fk)
        rep.min_kl_y_filtered = min(rep.min_kl_y_filtered, fm)
    return rep


# ---------------------------------------------------------------------------
# embedding bounds
# ---------------------------------------------------------------------------

def embedding_bounds(proto, n: int, k: int, p: int, mode: str = "exact", N: int = 10**6, gamma: float | None = None,
                     seed: int = 0, enum=None) -> tuple[EmbeddedProcess, list]:
    """Per-coordinate costs of Z^AND against the protocol-level quantities.

    The direct-sum steps compare each Z^AND cost with the matching Z^DISJ
    quantity divided by ``n``; the protocol-size steps then bound those by
    ``C`` (largest |Pi_i|) and ``|U|``.
    """
    from .nof import BoundCheck, ProtocolEnumeration, protocol_joint_distribution, FOUR_PARTY_MODIFIED

    if not 1 <= p < k:
        raise ContractError("need 1 <= p < k")
    enum = enum or ProtocolEnumeration(proto, n, k, gamma)
    emb = embed_and(proto, n, k, p, mode, N, enum.gamma, seed)
    J = protocol_joint_distribution(proto, n, k, p, ("S", "T", "Z"), gamma=enum.gamma, enum=enum)
    C = enum.C
    c_b = C + (enum.u_prime_max if proto.model == FOUR_PARTY_MODIFIED else 0)
    prof = emb.profile
    checks = [
        BoundCheck("I(Zand;X) <= I(Zdisj T;S)/n", prof.i_zx, mutual_information(J, ("Z", "T"), "S") / n),
        BoundCheck("I(Zand;Y) <= I(Zdisj;T)/n", prof.i_zy, mutual_information(J, "Z", "T") / n),
        BoundCheck("I(X;Y|Zand) <= I(S;T|Zdisj)/n", prof.i_xy_given_z, mutual_information(J, "S", "T", "Z") / n),
        BoundCheck("I(Zand;X) <= (C + pC/(k-p))/n", prof.i_zx, (C + p * C / (k - p)) / n),
        BoundCheck("I(Zand;Y) <= C/n", prof.i_zy, c_b / n),
        BoundCheck("I(X;Y|Zand) <= (|U|+n)/(pn)", prof.i_xy_given_z, (enum.u_max + n) / (p * n)),
    ]
    if enum.answers_correct():
        checks.append(BoundCheck("err_and1 = 0", prof.err_and1, 0.0))
    return emb, checks
