from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from multiphase.circuits import dumps_circuit, identity_circuit
from multiphase.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main
from multiphase.info import dumps_table, random_table


def run(argv, tmp_path):
    out = tmp_path / "out"
    code = main(argv + ["--out", str(out)])
    return code, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_bench_shape(tmp_path):
    code, out = run(["bench-multiphase", "--n", "4096", "--k", "256", "--queries", "1000"], tmp_path)
    assert code == EXIT_OK
    rows = read_csv(out / "bench_multiphase.csv")
    assert [r["scheme"] for r in rows] == ["precompute_answers", "store_T", "sqrt_scheme"]
    assert all(r["conformant"] == "True" for r in rows)
    summary = json.loads((out / "bench_multiphase_summary.json").read_text())
    assert summary["config"]["n"] == 4096 and summary["status"] == "ok"


def test_bench_sqrt_scaling(tmp_path):
    means = []
    for n in (1024, 4096):
        code, out = run(["bench-multiphase", "--n", str(n), "--k", "64", "--queries", "500"], tmp_path / str(n))
        assert code == EXIT_OK
        row = [r for r in read_csv(out / "bench_multiphase.csv") if r["scheme"] == "sqrt_scheme"][0]
        means.append(float(row["mean_t1"]) + float(row["mean_t2"]))
    assert means[1] <= 2.5 * means[0]


def test_untagged_queries_are_labelled(tmp_path):
    code, out = run(["bench-multiphase", "--n", "64", "--k", "4", "--queries", "8"], tmp_path)
    rows = read_csv(out / "bench_multiphase.csv")
    assert rows[0]["tag_counts"] == "untagged=8"


def test_reports_are_deterministic(tmp_path):
    argv = ["bench-multiphase", "--n", "256", "--k", "16", "--queries", "50", "--seed", "4"]
    _, a = run(argv, tmp_path / "a")
    _, b = run(argv, tmp_path / "b")
    for name in ("bench_multiphase.csv", "bench_multiphase_summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_verify_info_default(tmp_path):
    code, out = run(["verify-info", "--tables", "60"], tmp_path)
    assert code == EXIT_OK
    summary = json.loads((out / "verify_info_summary.json").read_text())
    assert set(summary["facts"]) == {"conditioning", "kl_form", "chain_rule", "extra_condition_up", "extra_condition_down"}
    names = [r["check"] for r in read_csv(out / "verify_info.csv")]
    for tag in ("(a)", "(b)", "(c)", "(d)"):
        assert any(tag in c for c in names)


def test_verify_info_corrupted_table(tmp_path, capsys):
    text = dumps_table(random_table(np.random.default_rng(0), [2, 2, 2]))
    lines = text.splitlines()
    # bump the first mass so the table no longer sums to one
    first = next(pos for pos, line in enumerate(lines) if line[:1].isdigit())
    *cells, mass = lines[first].split()
    lines[first] = " ".join(cells + [repr(float(mass) + 0.25)])
    bad = tmp_path / "bad.table"
    bad.write_text("\n".join(lines) + "\n")
    code = main(["verify-info", "--table", str(bad)])
    assert code == EXIT_VIOLATION
    assert "chain_rule" in capsys.readouterr().err


def test_verify_info_enumeration_guard():
    assert main(["verify-info", "--tables", "3", "--n", "4", "--k", "5"]) == EXIT_USAGE


def test_cutpaste_default_gamma(tmp_path):
    code, out = run(["cutpaste", "--restarts", "8", "--iterations", "200", "--z-size", "4", "--resolution", "200"],
                    tmp_path)
    assert code == EXIT_OK
    row = read_csv(out / "cutpaste.csv")[0]
    assert row["sweep_violations"] == "0"


def test_cutpaste_loose_eps_finds_cheap_kernels(tmp_path):
    code, out = run(["cutpaste", "--gamma", "0.01", "--eps", "10", "--restarts", "16", "--iterations", "300",
                     "--z-size", "4", "--resolution", "200"], tmp_path)
    assert code == EXIT_OK
    summary = json.loads((out / "cutpaste_summary.json").read_text())
    assert summary["search"]["feasible"] and summary["search"]["ratio"] < 0.1


def test_cutpaste_rejects_large_gamma():
    assert main(["cutpaste", "--gamma", "0.5", "--restarts", "2"]) == EXIT_USAGE


def test_translate_bundled(tmp_path):
    code, out = run(["translate-circuit"], tmp_path)
    assert code == EXIT_OK
    for row in read_csv(out / "translate_circuit.csv"):
        assert float(row["max_probes_with_repeats"]) <= float(row["bound"])
        assert row["equivalent"] == "True" and row["nonadaptive"] == "True"


def test_translate_identity_r1(tmp_path):
    path = tmp_path / "id.circ"
    path.write_text(dumps_circuit(identity_circuit(6)))
    code, out = run(["translate-circuit", str(path), "--r", "1"], tmp_path)
    assert code == EXIT_OK
    row = read_csv(out / "translate_circuit.csv")[0]
    assert float(row["bound"]) == 6.0 and row["G"] == "0"


def test_translate_corrupted_file(tmp_path, capsys):
    path = tmp_path / "cyc.circ"
    path.write_text("circuit v1\ninputs 1\ngate 1 level=1 kind=or in=0,2\ngate 2 level=2 kind=and in=1\noutputs 2\n")
    assert main(["translate-circuit", str(path)]) == EXIT_USAGE
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["bench-multiphase", "--bogus"],
    ["bench-multiphase", "--n", "0"],
    ["verify-info", "--mode", "fast"],
    ["cutpaste", "--resolution", "10"],
    [],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 128, "k": 8, "queries": 20, "seed": 1}))
    code, out = run(["bench-multiphase", "--config", str(cfg), "--k", "4"], tmp_path)
    assert code == EXIT_OK
    conf = json.loads((out / "bench_multiphase_summary.json").read_text())["config"]
    assert conf["n"] == 128 and conf["k"] == 4 and conf["seed"] == 1
    cfg.write_text(json.dumps({"nn": 3}))
    assert main(["bench-multiphase", "--config", str(cfg)]) == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "multiphase", "translate-circuit", "--r", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "ok"
