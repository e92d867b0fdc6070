import json
import subprocess
import sys

import numpy as np
import pytest

from phidca.cli import compare_traces, main
from phidca.config import load_config, parse_run
from phidca.core import ConfigError
from phidca.driver import SolverOptions, run_phi_dca
from phidca.fixtures import fixture_names, get_fixture
from phidca.traceio import COLUMNS, REPORT_KEYS, read_trace_csv, trace_to_csv, write_report, write_trace_csv


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, cfg, label="out"):
    out = tmp_path / label
    code = main(["run", "--config", write_config(tmp_path, cfg, f"{label}.json"), "--out", str(out)])
    return code, out


def test_run_happy_path(tmp_path):
    code, out = run(tmp_path, {"fixture": "quad-1d", "max_iter": 20, "checks": ["decrease"]})
    assert code == 0
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header == ",".join(COLUMNS + ("x0",))
    report = json.loads((out / "report.json").read_text())
    assert tuple(report) == REPORT_KEYS
    assert report["check_failures"] == []


def test_unknown_fixture_exits_2(tmp_path, capsys):
    code, _ = run(tmp_path, {"fixture": "nope"})
    assert code == 2
    assert "unknown fixture" in capsys.readouterr().err


@pytest.mark.parametrize("cfg", [
    {"fixture": "quad-1d", "colour": 1},
    {"fixture": "quad-1d", "max_iter": 0},
    {"fixture": "quad-1d", "gap_tol": -1},
    {"fixture": "quad-1d", "checks": ["bogus"]},
    {"fixture": "quad-1d", "checks": [{"kind": "qlinear"}]},
    {"fixture": "quad-1d", "checks": [{"kind": "envelope", "bound": "other"}]},
    {"fixture": "quad-1d", "algorithm": "fancy"},
    {"fixture": "quad-1d", "x0": [1.0, 2.0]},
    {"fixture": "quad-1d", "coupling": {"kind": "Quadratic", "L": -1}},
    {"fixture": {"name": "pl-quad", "params": {"eta": 1}}},
])
def test_invalid_configs_exit_2(tmp_path, cfg):
    code, _ = run(tmp_path, cfg)
    assert code == 2


def test_unreadable_config_exits_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{ // comment\n}")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_domain_error_exits_3_with_partial_trace(tmp_path):
    code, out = run(tmp_path, {"fixture": "entropy-box", "x0": [-1.0, 2.0]})
    assert code == 3
    header, data = read_trace_csv(out / "trace.csv")
    assert header[0] == "k" and data.shape[0] == 0
    report = json.loads((out / "report.json").read_text())
    assert report["check_failures"]


def test_failed_check_exits_1(tmp_path):
    cfg = {"fixture": {"name": "pl-quad", "params": {"mu": 0.5}}, "max_iter": 30,
           "checks": [{"kind": "qlinear", "mu1": 0.9}]}
    code, out = run(tmp_path, cfg)
    assert code == 1
    report = json.loads((out / "report.json").read_text())
    assert report["certificates"][0]["kind"] == "QLinear"
    assert not report["certificates"][0]["passed"]


def test_checks_pass_on_converged_fixture(tmp_path):
    cfg = {"fixture": "lasso-2d", "checks": ["decrease", {"kind": "subgradient-grid", "spacing": 0.005},
                                             {"kind": "oracle-grid", "spacing": 0.005, "records": 2}]}
    code, out = run(tmp_path, cfg)
    assert code == 0, json.loads((out / "report.json").read_text())


def test_envelope_check_via_cli(tmp_path):
    cfg = {"fixture": "cosh-aniso", "algorithm": {"kind": "averaged", "p": 1}, "max_iter": 200,
           "min_iter": 200, "checks": [{"kind": "envelope", "bound": "aniso"}]}
    code, out = run(tmp_path, cfg)
    assert code == 0
    cert = json.loads((out / "report.json").read_text())["certificates"][0]
    assert cert["kind"] == "SublinearEnvelope" and cert["passed"]


def test_batch_runs(tmp_path):
    cfg = {"runs": [{"fixture": "quad-1d", "max_iter": 3}, {"fixture": "dca-quad", "max_iter": 3}]}
    assert main(["run", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "run0" / "trace.csv").exists()
    assert (tmp_path / "b" / "run1" / "report.json").exists()


def test_output_dir_from_config(tmp_path):
    cfg = {"fixture": "quad-1d", "max_iter": 2, "output_dir": str(tmp_path / "cfgout")}
    assert main(["run", "--config", write_config(tmp_path, cfg)]) == 0
    assert (tmp_path / "cfgout" / "trace.csv").exists()
    assert main(["run", "--config", write_config(tmp_path, {"fixture": "quad-1d"}, "n.json")]) == 2


def test_round_trip_bit_exact(tmp_path):
    p = get_fixture("logistic-2d")
    tr = run_phi_dca(p, p.meta["x0"], SolverOptions(max_iter=25, min_iter=25))
    path = tmp_path / "t.csv"
    write_trace_csv(tr, path, p.dim)
    header, data = read_trace_csv(path)
    for row, r in zip(data, tr.records):
        assert row[0] == r.k
        assert row[1] == r.F_value and row[2] == r.gap_primal and row[3] == r.gap_dual
        assert row[4] == r.decrease_residual and row[5] == r.inner_residual and row[6] == r.step_norm
        assert np.array_equal(row[8:], r.x)


def test_round_trip_non_finite(tmp_path):
    p = get_fixture("fig2-phi15")
    tr = run_phi_dca(p, [5.0], SolverOptions(max_iter=2, min_iter=2))
    write_trace_csv(tr, tmp_path / "t.csv", 1)
    _, data = read_trace_csv(tmp_path / "t.csv")
    assert data[0, 2] == np.inf


def test_determinism(tmp_path):
    cfg = {"fixture": "entropy-box", "max_iter": 40}
    _, a = run(tmp_path, cfg, "a")
    _, b = run(tmp_path, cfg, "b")
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_timing_column(tmp_path):
    _, out = run(tmp_path, {"fixture": "quad-1d", "max_iter": 3, "record_timing": True})
    _, data = read_trace_csv(out / "trace.csv")
    assert np.all(data[:, 7] > 0)


def test_compare(tmp_path, capsys):
    base = {"fixture": "quad-1d", "max_iter": 20, "min_iter": 20}
    _, a = run(tmp_path, dict(base, coupling={"kind": "Quadratic", "L": 1.0}), "l1")
    _, b = run(tmp_path, dict(base, coupling={"kind": "Quadratic", "L": 2.0}), "l2")
    capsys.readouterr()
    assert main(["compare", str(a / "trace.csv"), str(a / "trace.csv"), "--tol", "0"]) == 0
    assert capsys.readouterr().out.strip() == "max deviation: 0"
    assert main(["compare", str(a / "trace.csv"), str(b / "trace.csv"), "--tol", "1e-10"]) == 1
    assert float(capsys.readouterr().out.split(":")[1]) > 0.1


def test_compare_prefix_and_dimension(tmp_path, capsys):
    _, a = run(tmp_path, {"fixture": "quad-1d", "max_iter": 5, "min_iter": 5}, "a")
    _, b = run(tmp_path, {"fixture": "quad-1d", "max_iter": 9, "min_iter": 9}, "b")
    _, c = run(tmp_path, {"fixture": "lasso-2d", "max_iter": 3}, "c")
    assert compare_traces(a / "trace.csv", b / "trace.csv") == (0.0, 5, 9)
    capsys.readouterr()
    assert main(["compare", str(a / "trace.csv"), str(b / "trace.csv"), "--tol", "0"]) == 0
    assert "compared the first 5" in capsys.readouterr().out
    assert main(["compare", str(a / "trace.csv"), str(c / "trace.csv"), "--tol", "1"]) == 1
    assert main(["compare", str(a / "trace.csv"), str(tmp_path / "none.csv"), "--tol", "1"]) == 1


def test_list_fixtures(capsys):
    assert main(["list-fixtures"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == sorted(lines) == fixture_names()
    assert "fig1-maxquad" in lines and "fig2-phi15" in lines
    for required in ("quad-1d", "pl-quad", "lasso-2d", "logistic-2d", "l0l1-exp", "rosenbrock-2d",
                     "entropy-box", "cosh-aniso"):
        assert required in lines


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "phidca.cli", "list-fixtures"], capture_output=True, text=True)
    assert out.returncode == 0 and "quad-1d" in out.stdout


def test_config_digest_and_batch(tmp_path):
    a = parse_run({"fixture": "quad-1d", "max_iter": 5})
    b = parse_run({"max_iter": 5, "fixture": "quad-1d"})
    assert a.digest() == b.digest()
    assert a.digest() != parse_run({"fixture": "quad-1d", "max_iter": 6}).digest()
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, {"runs": []}))


def test_report_keys_enforced(tmp_path):
    with pytest.raises(ValueError):
        write_report({"final_F": 1.0}, tmp_path / "r.json")


def test_csv_header_for_empty_trace():
    tr = run_phi_dca(get_fixture("entropy-box"), [-1.0, 1.0])
    assert trace_to_csv(tr, 2) == ",".join(COLUMNS + ("x0", "x1")) + "\n"
