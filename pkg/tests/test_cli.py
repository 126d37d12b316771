import json
from importlib import resources
from pathlib import Path

import pytest

from opinionforge import cli
from opinionforge.errors import ZeroNormalizerError
from opinionforge.formats import load_opinions_json, read_manifest, read_trace

TINY = Path(str(resources.files("opinionforge") / "data" / "tiny.csv"))
FAST_GRIDS = ["--bias-grid", "5", "--epsilon-grid", "9", "--theta-grid", "9", "--lambda-max", "6"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_infer_without_input_is_a_usage_error(capsys):
    assert run("infer") == 1
    err = capsys.readouterr().err
    assert "usage:" in err and "--input" in err


def test_unknown_command_and_bad_flag(capsys):
    assert run("transmogrify") == 1
    assert run("infer", "--input", TINY, "--iterations", "many") == 1
    assert run("generate", "--levels", "4", "--theta", "1,2,3") == 1
    assert "error" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert run("--help") == 0
    assert "generate" in capsys.readouterr().out


def test_generate_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run("generate", "--seed", 7, "--output-dir", tmp_path / d) == 0
    for name in ("ratings.csv", "truth.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert run("generate", "--seed", 8, "--output-dir", tmp_path / "c") == 0
    assert (tmp_path / "c" / "ratings.csv").read_bytes() != (tmp_path / "a" / "ratings.csv").read_bytes()
    rows = (tmp_path / "a" / "ratings.csv").read_text().splitlines()
    assert rows[0] == "trustor,trustee,rating,lambda"
    assert len(rows) == 1 + 600


def test_full_pipeline_on_bundled_fixture(tmp_path, capsys):
    out = tmp_path / "run"
    assert run("infer", "--input", TINY, "--output-dir", out, "--iterations", 300, "--burn-in", 50,
               "--seed", 3, *FAST_GRIDS) == 0
    manifest = read_manifest(out / "manifest.json")
    assert manifest.command == "infer" and manifest.seed == 3
    assert set(manifest.outputs) == {"trace", "opinions", "ids"}
    assert manifest.missing_outputs(out) == []
    assert manifest.config["iterations"] == 300 and manifest.config["lambda_mode"] == "blocked_joint"

    doc = json.loads((out / "opinions.json").read_text())
    assert {(r["trustor"], r["trustee"]) for r in doc["edges"]} == {
        ("alice", "carol"), ("alice", "dave"), ("bob", "carol"), ("bob", "dave"), ("erin", "carol"),
    }
    trace, ids = read_trace(out / "trace.ndjson")
    assert len(trace) == 250 and ids.trustors == ["alice", "bob", "erin"]

    summ = tmp_path / "summ"
    assert run("summarize", "--input", out / "trace.ndjson", "--output-dir", summ) == 0
    assert (summ / "opinions.json").read_bytes() == (out / "opinions.json").read_bytes()
    assert read_manifest(summ / "manifest.json").missing_outputs(summ) == []

    diag = tmp_path / "diag"
    assert run("diagnose", "--input", out / "trace.ndjson", "--output-dir", diag) == 0
    report = capsys.readouterr().err
    assert "ess=" in report and "geweke_z=" in report
    stats = json.loads((diag / "diagnostics.json").read_text())
    assert stats["length"] == 250
    plot = (diag / "plot.csv").read_text().splitlines()
    assert plot[0] == "iteration,statistic,value" and len(plot) == 1 + 250 * 8
    assert read_manifest(diag / "manifest.json").missing_outputs(diag) == []


def test_manifest_reproduces_run_byte_for_byte(tmp_path):
    a = tmp_path / "a"
    assert run("infer", "--input", TINY, "--output-dir", a, "--iterations", 40, "--seed", 11, *FAST_GRIDS) == 0
    cfg = read_manifest(a / "manifest.json").config
    b = tmp_path / "b"
    argv = [
        "infer", "--input", TINY, "--output-dir", b, "--seed", read_manifest(a / "manifest.json").seed,
        "--iterations", cfg["iterations"], "--burn-in", cfg["burn_in"], "--thin", cfg["thin"],
        "--lambda-max", cfg["lambda_max"], "--bias-grid", cfg["bias_grid"],
        "--epsilon-grid", cfg["epsilon_grid"], "--epsilon-min", cfg["epsilon_bounds"][0], "--epsilon-max", cfg["epsilon_bounds"][1],
        "--theta-grid", cfg["theta_grid"], "--theta-min", cfg["theta_bounds"][0], "--theta-max", cfg["theta_bounds"][1],
        "--lambda-mode", cfg["lambda_mode"].replace("_", "-"),
    ]
    assert run(*argv) == 0
    for name in ("trace.ndjson", "opinions.json", "ids.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_fixed_mode_on_generated_data(tmp_path):
    assert run("generate", "--seed", 2, "--num-trustors", 3, "--num-trustees", 2, "--lambda-max", 6,
               "--output-dir", tmp_path) == 0
    assert run("infer", "--input", tmp_path / "ratings.csv", "--lambda-mode", "fixed", "--iterations", 30,
               "--output-dir", tmp_path / "inf", *FAST_GRIDS) == 0
    summary = load_opinions_json(tmp_path / "inf" / "opinions.json")
    truth = json.loads((tmp_path / "truth.json").read_text())
    assert sorted(summary.lambda_mean) == sorted(float(e["lambda"]) for e in truth["edges"])


def test_fixed_mode_without_lambda_column_is_a_data_error(tmp_path, capsys):
    assert run("infer", "--input", TINY, "--lambda-mode", "fixed", "--iterations", 5,
               "--output-dir", tmp_path, *FAST_GRIDS) == 2
    assert "data error" in capsys.readouterr().err


def test_data_errors_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("trustor,trustee,rating\nu,x,9\n")
    assert run("infer", "--input", bad, "--output-dir", tmp_path) == 2
    assert "line 2" in capsys.readouterr().err
    assert run("infer", "--input", tmp_path / "missing.csv", "--output-dir", tmp_path) == 2
    assert run("summarize", "--input", bad, "--output-dir", tmp_path) == 2
    assert not (tmp_path / "manifest.json").exists()


def test_numerical_abort_exits_three(tmp_path, monkeypatch, capsys):
    def explode(*args, **kwargs):
        raise ZeroNormalizerError("all weights underflowed")

    monkeypatch.setattr(cli, "gibbs_run", explode)
    assert run("infer", "--input", TINY, "--output-dir", tmp_path, "--iterations", 1) == 3
    assert "numerical abort" in capsys.readouterr().err


def test_oracle_command(tmp_path):
    csv_path = tmp_path / "two.csv"
    csv_path.write_text("trustor,trustee,rating\nu,x,2\nv,x,1\n")
    assert run("oracle", "--input", csv_path, "--levels", 2, "--lambda-max", 2, "--output-dir", tmp_path) == 0
    doc = json.loads((tmp_path / "exact.json").read_text())
    assert doc["ids"] == {"trustors": ["u", "v"], "trustees": ["x"]}
    assert len(doc["omega_marginals"]) == 2
    assert abs(sum(doc["omega_marginals"][0]) - 1) < 1e-12
    assert read_manifest(tmp_path / "manifest.json").missing_outputs(tmp_path) == []
    assert run("oracle", "--input", TINY, "--lambda-max", 4, "--bias-grid", 11, "--epsilon-grid", 11,
               "--theta-grid", 11, "--output-dir", tmp_path / "big") == 2


@pytest.mark.parametrize("flag", ["--lambda-max", "--bias-grid"])
def test_out_of_range_oracle_flags_are_usage_errors(tmp_path, flag):
    assert run("oracle", "--input", TINY, flag, 99, "--output-dir", tmp_path) == 1
