"""Command-line experiment runner.

Every command writes a CSV and a JSON summary (which embeds the resolved
configuration) to ``--out`` when given, and prints the summary otherwise.
Exit status: 0 when nothing was violated, 1 on a violated assertion, 2 on a
usage or parse error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

COMMANDS = ("bench-multiphase", "verify-info", "cutpaste", "translate-circuit")


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    n: int | None = None
    k: int | None = None
    p: int | None = None
    gamma: float | None = None
    w: int | None = None
    r: int | None = None
    eps: float = 1e-2
    seed: int = 0
    mode: str = "exact"
    queries: int = 1000
    tables: int = 1000
    restarts: int = 200
    iterations: int = 3000
    z_size: int = 16
    resolution: int = 1000
    samples: int = 10**6
    min_ratio: float = 1e-3
    circuit: str | None = None
    table: str | None = None
    out: str | None = None
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        def positive(name):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise UsageError(f"--{name.replace('_', '-')} must be positive, got {v}")

        for name in ("n", "k", "p", "w", "r", "queries", "tables", "restarts", "iterations", "z_size", "samples"):
            positive(name)
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise UsageError("--gamma must lie in (0, 1)")
        if self.eps <= 0:
            raise UsageError("--eps must be positive")
        if self.mode not in ("exact", "mc"):
            raise UsageError("--mode must be exact or mc")
        if self.resolution < 100:
            raise UsageError("--resolution must be at least 100")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class Report:
    config: ExperimentConfig
    rows: list[dict]
    summary: dict
    violations: list[str]

    @property
    def status(self) -> int:
        return EXIT_VIOLATION if self.violations else EXIT_OK

    def csv_text(self) -> str:
        if not self.rows:
            return ""
        cols = list(self.rows[0])
        buf = io.StringIO()
        wr = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
        wr.writeheader()
        for row in self.rows:
            wr.writerow({c: _fmt(row.get(c)) for c in cols})
        return buf.getvalue()

    def summary_text(self) -> str:
        cfg = {k: v for k, v in asdict(self.config).items() if k not in ("out", "extra")}
        body = {"config": cfg, "status": "ok" if not self.violations else "violation",
                "violations": self.violations, **self.summary}
        return json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n"

    def write(self, out: str | None) -> None:
        if out is None:
            sys.stdout.write(self.summary_text())
            return
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        stem = self.config.command.replace("-", "_")
        (d / f"{stem}.csv").write_text(self.csv_text())
        (d / f"{stem}_summary.json").write_text(self.summary_text())
        sys.stdout.write(f"wrote {d / (stem + '.csv')} and {d / (stem + '_summary.json')}\n")


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 12))
    if isinstance(v, dict):
        return ";".join(f"{'untagged' if k in (None, '') else k}={v[k]}" for k in sorted(v, key=str))
    return v


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_bench_multiphase(cfg: ExperimentConfig) -> Report:
    from .cellprobe import CorrectnessError, HarnessError, benchmark, shipped_schemes

    n, k = cfg.n or 1 << 12, cfg.k or 1 << 8
    try:
        rows = benchmark(shipped_schemes(), n, k, cfg.queries, cfg.seed, cfg.gamma, cfg.w)
    except (CorrectnessError, HarnessError) as exc:
        return Report(cfg, [], {"n": n, "k": k}, [f"soundness failure: {exc}"])
    violations = [f"{r['scheme']}: semi-adaptive check failed" for r in rows if not r["conformant"]]
    for r in rows:
        r["conformant"] = bool(r["conformant"])
    return Report(cfg, rows, {"n": n, "k": k, "schemes": [r["scheme"] for r in rows]}, violations)


def cmd_verify_info(cfg: ExperimentConfig) -> Report:
    from .info import InfoContractError, bernoulli_divergence_check, fact_corpus, loads_table, verify_facts
    from .nof import registered_protocols, verify_goodq_bounds

    rows: list[dict] = []
    violations: list[str] = []
    summary: dict = {}
    if cfg.table is not None:
        try:
            text = Path(cfg.table).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read table: {exc}") from None
        try:
            J = loads_table(text)
        except InfoContractError as exc:
            violations.append(f"table rejected ({exc}); no fact (conditioning, kl_form, chain_rule, extra_condition_up, extra_condition_down) certified")
            return Report(cfg, rows, {"table": cfg.table}, violations)
        except (ValueError, IndexError) as exc:
            raise UsageError(f"cannot parse table: {exc}") from None
        tables = [J]
    else:
        tables = fact_corpus(cfg.seed, cfg.tables)
    counts: dict[str, dict[str, int]] = {}
    for t, J in enumerate(tables):
        rep = verify_facts(J)
        for res in rep.results:
            c = counts.setdefault(res.fact, {"satisfied": 0, "violated": 0, "not-applicable": 0})
            c[res.status] += 1
            if res.status == "violated":
                violations.append(f"table {t}: fact {res.fact} residual {res.value:.3g} ({res.detail})")
    for fact, c in sorted(counts.items()):
        rows.append({"check": f"fact {fact}", **c})
    summary["facts"] = counts

    for p in (1e-2, 1e-3, 1e-4):
        chk = bernoulli_divergence_check(p)
        rows.append({"check": f"kl boundary p={p:g}", "satisfied": int(bool(chk["ok"])), "violated": int(not chk["ok"]),
                     "not-applicable": 0})
        if not chk["ok"]:
            violations.append(f"kl boundary check failed at p={p:g}")

    if cfg.table is None:
        n, k, p = cfg.n or 2, cfg.k or 3, cfg.p or 2
        if n * (k + 1) > 20:
            raise UsageError(f"n(k+1) = {n * (k + 1)} exceeds the exhaustive enumeration limit of 20")
        goodq = []
        for proto in registered_protocols(n, k):
            rep = verify_goodq_bounds(proto, n, k, p, cfg.gamma, seed=cfg.seed)
            goodq.append(rep.lines())
            for c in rep.checks:
                rows.append({"check": f"{proto.name} {c.name}", "satisfied": int(c.holds), "violated": int(not c.holds),
                             "not-applicable": 0})
                if not c.holds:
                    violations.append(f"{proto.name}: {c.line()}")
        summary["goodq"] = goodq

        from .andlab import embedding_bounds

        embedding = {}
        for proto in registered_protocols(n, k):
            emb, checks = embedding_bounds(proto, n, k, p, cfg.mode, cfg.samples, cfg.gamma, cfg.seed)
            embedding[proto.name] = {"profile": emb.profile.as_dict(), "stderr": emb.stderr}
            for c in checks:
                # Monte Carlo profiles are estimates, so only exact mode asserts
                holds = c.holds or cfg.mode == "mc"
                rows.append({"check": f"{proto.name} AND {c.name}", "satisfied": int(holds), "violated": int(not holds),
                             "not-applicable": 0})
                if not holds:
                    violations.append(f"{proto.name}: {c.line()}")
        summary["embedding"] = embedding
    return Report(cfg, rows, summary, violations)


def cmd_cutpaste(cfg: ExperimentConfig) -> Report:
    from .andlab import adversarial_search, largediv_sweep
    from .core import ContractError

    gamma = 1e-2 if cfg.gamma is None else cfg.gamma
    try:
        res = adversarial_search(gamma, cfg.z_size, cfg.eps, cfg.restarts, cfg.seed, cfg.iterations)
        sweep = largediv_sweep(gamma, cfg.resolution)
    except ContractError as exc:
        raise UsageError(str(exc)) from None
    violations = []
    ratio = res.ratio if res.feasible else None
    if res.feasible and ratio < cfg.min_ratio:
        violations.append(f"feasible kernel with I(Z;Y)/gamma = {ratio:.3g} < {cfg.min_ratio:g}")
    if sweep.violations or sweep.focused_violations:
        violations.append(f"simplex sweep found {sweep.violations + sweep.focused_violations} violating points")
    row = {"gamma": gamma, "z_size": cfg.z_size, "eps": cfg.eps, "restarts": cfg.restarts, "feasible": res.feasible,
           "feasible_restarts": res.feasible_restarts, "best_restart": res.best_restart,
           "best_i_zy_over_gamma": ratio if ratio is not None else "",
           "sweep_points": sweep.points + sweep.focused_points,
           "sweep_filtered": sweep.filtered + sweep.focused_filtered,
           "sweep_violations": sweep.violations + sweep.focused_violations, "kappa": sweep.kappa}
    summary = {"search": {"feasible": res.feasible, "ratio": ratio,
                          "profile": res.profile.as_dict() if res.profile else None,
                          "best_violation": res.best_violation},
               "sweep": asdict(sweep)}
    return Report(cfg, [row], summary, violations)


def _load_circuit(cfg: ExperimentConfig):
    from .circuits import CircuitParseError, loads_circuit, random_circuit

    if cfg.circuit is None:
        # bundled example: a seeded depth-2 circuit
        return random_circuit(np.random.default_rng(2024), 8, 4, 2, max_wires=64), "bundled-depth2"
    try:
        text = Path(cfg.circuit).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read circuit: {exc}") from None
    try:
        return loads_circuit(text), cfg.circuit
    except CircuitParseError as exc:
        raise UsageError(f"{cfg.circuit}: {exc}") from None


def cmd_translate_circuit(cfg: ExperimentConfig) -> Report:
    from .circuits import nonadaptivity_audit, translate_circuit

    c, source = _load_circuit(cfg)
    ell = c.wires
    rs = [cfg.r] if cfg.r else [1 << e for e in range(max(1, ell.bit_length()))]
    if ell and any(r > ell for r in rs):
        raise UsageError(f"--r must not exceed the wire count {ell}")
    rng = np.random.default_rng(cfg.seed)
    if c.n_inputs <= 12:
        X = ((np.arange(1 << c.n_inputs)[:, None] >> np.arange(c.n_inputs)) & 1).astype(np.uint8)
        check = "exhaustive"
    else:
        X = rng.integers(0, 2, size=(10**4, c.n_inputs), dtype=np.uint8)
        check = "monte-carlo"
    expected = c.eval(X)
    rows, violations = [], []
    for r in rs:
        ds = translate_circuit(c, r)
        mem = ds.preprocess_batch(X)
        equal = all(np.array_equal(ds.answer_batch(i, mem), expected[:, i]) for i in range(c.k))
        audit_ok, audit_msg = nonadaptivity_audit(ds, 100, cfg.seed)
        row = {"r": r, "wires": ell, "depth": c.depth, "G": len(ds.G), "s": ds.s, "w": ds.w,
               "max_probes": ds.max_probes, "max_probes_with_repeats": ds.max_probes_with_repeats,
               "bound": ds.bound, "equivalent": equal, "nonadaptive": audit_ok}
        rows.append(row)
        if ds.max_probes_with_repeats > ds.bound:
            violations.append(f"r={r}: {ds.max_probes_with_repeats} probes > bound {ds.bound}")
        if not len(ds.G) < r and ell:
            violations.append(f"r={r}: |G| = {len(ds.G)} not < r")
        if not equal:
            violations.append(f"r={r}: translated structure disagrees with the circuit")
        if not audit_ok:
            violations.append(f"r={r}: {audit_msg}")
    summary = {"circuit": source, "n": c.n_inputs, "k": c.k, "wires": ell, "depth": c.depth, "equivalence": check}
    return Report(cfg, rows, summary, violations)


HANDLERS = {
    "bench-multiphase": cmd_bench_multiphase,
    "verify-info": cmd_verify_info,
    "cutpaste": cmd_cutpaste,
    "translate-circuit": cmd_translate_circuit,
}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file of parameters; flags override it")
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--p", type=int)
    common.add_argument("--gamma", type=float)
    common.add_argument("--w", type=int)
    common.add_argument("--r", type=int)
    common.add_argument("--eps", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=("exact", "mc"))
    common.add_argument("--out", help="directory for the CSV and summary")

    parser = _Parser(prog="multiphase", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    b = sub.add_parser("bench-multiphase", parents=[common], help="probe statistics of the shipped data structures")
    b.add_argument("--queries", type=int)
    v = sub.add_parser("verify-info", parents=[common], help="information facts and protocol bounds")
    v.add_argument("--tables", type=int)
    v.add_argument("--table", help="check one joint-table file instead of the random corpus")
    c = sub.add_parser("cutpaste", parents=[common], help="adversarial AND search and simplex sweep")
    c.add_argument("--restarts", type=int)
    c.add_argument("--iterations", type=int)
    c.add_argument("--z-size", dest="z_size", type=int)
    c.add_argument("--resolution", type=int)
    c.add_argument("--min-ratio", dest="min_ratio", type=float)
    t = sub.add_parser("translate-circuit", parents=[common], help="circuit to static data structure translation")
    t.add_argument("circuit", nargs="?", help="circuit file (default: bundled depth-2 example)")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot load config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config must be a JSON object")
        known = set(ExperimentConfig.__dataclass_fields__) - {"command", "extra"}
        unknown = sorted(set(loaded) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        values.update(loaded)
    for key, val in vars(args).items():
        if key in ("config", "command") or val is None:
            continue
        values[key] = val
    cfg = ExperimentConfig(command=args.command, **values)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        report = HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        sys.stderr.write(f"multiphase: error: {exc}\n")
        return EXIT_USAGE
    report.write(cfg.out)
    for v in report.violations:
        sys.stderr.write(f"violation: {v}\n")
    return report.status


if __name__ == "__main__":
    raise SystemExit(main())
