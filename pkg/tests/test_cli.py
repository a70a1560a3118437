import json
from importlib import resources

import jsonschema
import pytest

from sirsn import cli


def schema(name):
    return json.loads(resources.files("sirsn").joinpath("schemas", f"{name}.schema.json").read_text())


def run(tmp_path, *argv):
    return cli.main(["--out", str(tmp_path), *argv])


@pytest.fixture(autouse=True)
def no_env_out(monkeypatch):
    monkeypatch.delenv(cli.OUT_ENV, raising=False)


def test_route_example(tmp_path, capsys):
    assert run(tmp_path, "route", "--from", "1,0", "--to", "1,2", "--gamma", "3/4", "--svg") == 0
    rec = json.loads((tmp_path / "route.json").read_text())
    assert rec["cost"] == {"1": "1"}
    assert rec["cost_value"] == "3/4"
    assert rec["turn_points"][0] == ["1", "0"] and rec["turn_points"][-1] == ["1", "2"]
    jsonschema.validate(rec, schema("route"))
    assert (tmp_path / "route.svg").read_text().startswith("<svg")
    assert json.loads(capsys.readouterr().out) == rec


def test_route_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["route", "--from", "3/4,-5", "--to", "7,2.5", "--hmin", "-3", "--seed", "9", "--svg"]
    assert run(a, *argv) == 0 and run(b, *argv) == 0
    for name in ("route.json", "route.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_route_with_invariance(tmp_path):
    assert run(tmp_path, "route", "--from", "0.3,0.1", "--to", "2.2,1.7", "--invariance", "5") == 0
    jsonschema.validate(json.loads((tmp_path / "route.json").read_text()), schema("route"))


def test_usage_errors(tmp_path):
    assert run(tmp_path, "route", "--from", "1,1", "--to", "1,1") == cli.EXIT_USAGE
    assert run(tmp_path, "route", "--from", "1,1") == cli.EXIT_USAGE
    assert run(tmp_path, "route", "--from", "1,1", "--to", "2,2", "--gamma", "1/2") == cli.EXIT_USAGE
    assert run(tmp_path, "stats", "--stat", "ell", "--lambda", "") == cli.EXIT_USAGE
    assert run(tmp_path, "--workers", "0", "stats", "--stat", "ell") == cli.EXIT_USAGE


def test_config_file_and_env_override(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "route", "from": "1,0", "to": "1,2", "hmin": 0, "seed": 0}))
    target = tmp_path / "env"
    monkeypatch.setenv(cli.OUT_ENV, str(target))
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "ignored")]) == 0
    assert json.loads((target / "route.json").read_text())["cost"] == {"1": "1"}
    assert not (tmp_path / "ignored").exists()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"command": "route", "from": "1,0", "to": "1,2", "colour": "red"}))
    assert cli.main(["--config", str(bad)]) == cli.EXIT_USAGE


def test_stats_ell_two_records(tmp_path):
    assert run(tmp_path, "stats", "--stat", "ell", "--lambda", "1,4", "--reps", "3", "--half", "1",
               "--margin", "1.5", "--hmin", "-3") == 0
    rec = json.loads((tmp_path / "stats_ell.json").read_text())
    jsonschema.validate(rec, schema("stats"))
    assert [r["params"]["lambda"] for r in rec["records"]] == [1.0, 4.0]
    assert all(r["value"] > 0 and r["n"] == 3 for r in rec["records"])
    csv = (tmp_path / "stats_ell.csv").read_text().splitlines()
    assert csv[0] == "statistic,lambda,r,value,std_error,n" and len(csv) == 3


def test_stats_rerun_identical(tmp_path):
    argv = ["stats", "--stat", "p", "--lambda", "1", "--r", "0.5,1", "--reps", "2", "--half", "1", "--margin", "1",
            "--hmin", "-3"]
    assert run(tmp_path / "a", *argv) == 0 and run(tmp_path / "b", *argv) == 0
    assert (tmp_path / "a" / "stats_p.json").read_bytes() == (tmp_path / "b" / "stats_p.json").read_bytes()


def test_verify_bounds_reports_values_and_fails_on_D(tmp_path, capsys):
    code = run(tmp_path, "verify", "--suite", "bounds")
    rec = json.loads((tmp_path / "verify_bounds.json").read_text())
    jsonschema.validate(rec, schema("verify"))
    st = rec["suites"]["bounds"]["steiner"]
    assert st["lower"] == 0.25 and abs(st["sup"] - 0.283) < 1e-3 and abs(st["upper"] - 0.35355) < 1e-5
    assert rec["suites"]["bounds"]["bound_curve"]["theta_ok"]
    assert not rec["suites"]["bounds"]["bound_curve"]["D_ok"]
    assert code == cli.EXIT_FAIL
    assert "bounds: FAIL" in capsys.readouterr().out


def test_verify_figure6(tmp_path):
    assert run(tmp_path, "verify", "--suite", "figure6", "--hmax", "5") == 0
    rec = json.loads((tmp_path / "verify_figure6.json").read_text())
    jsonschema.validate(rec, schema("verify"))
    assert rec["suites"]["figure6"]["h"] == 4
    assert rec["suites"]["figure6"]["eta"] == "1/48"


def test_verify_lemmas_small(tmp_path):
    assert run(tmp_path, "verify", "--suite", "lemmas", "--trials", "15") == 0
    jsonschema.validate(json.loads((tmp_path / "verify_lemmas.json").read_text()), schema("verify"))


def test_transit_command(tmp_path):
    assert run(tmp_path, "transit", "--pairs", "4", "--hmin", "-3") == 0
    rec = json.loads((tmp_path / "transit.json").read_text())
    jsonschema.validate(rec, schema("transit"))
    assert rec["cost_model"]["m_crit"] == pytest.approx(1000.0)
    assert (tmp_path / "transit_audit.csv").read_text().startswith("x1,y1,x2,y2")


@pytest.mark.parametrize("model", ["lines", "gabriel"])
def test_alt_command(tmp_path, model):
    assert run(tmp_path, "alt", "--model", model, "--queries", "5") == 0
    rec = json.loads((tmp_path / f"alt_{model}.json").read_text())
    jsonschema.validate(rec, schema("alt"))
    assert rec["model"] == model
