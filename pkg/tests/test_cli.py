import json
import subprocess
import sys

import numpy as np
import pytest

from gradedtoda.cli import main, parse_init, parse_window


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def csv_body(text):
    """Header and rows of the CSV body; the numeric columns as a float array."""
    lines = [ln.split(",") for ln in text.splitlines() if not ln.startswith("#")]
    header, rows = lines[0], lines[1:]
    numeric = [i for i, c in enumerate(header) if not c.endswith("_id")]
    return header, rows, np.array([[float(r[i]) for i in numeric] for r in rows])


def summary(text):
    line = next(ln for ln in text.splitlines() if ln.startswith("# summary:"))
    return dict(kv.split("=", 1) for kv in line[len("# summary: "):].split())


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def test_parse_window():
    assert parse_window("-5:5") == (-5, 5)
    assert parse_window([0, 3]) == (0, 3)


def test_parse_init_soliton_commas():
    spec = parse_init("soliton:N=2,kappa=1:1.5,gamma=1,sigma=+1:-1")
    assert spec.soliton.kappa == (1.0, 1.5)
    assert spec.soliton.sigma == (1, -1)
    assert spec.soliton.gamma == (1.0, 1.0)


def test_parse_init_random_is_seeded(ladder):
    a = parse_init("random:amp=0.2", seed=3).phase_state(ladder)
    b = parse_init("random:amp=0.2", seed=3).phase_state(ladder)
    np.testing.assert_array_equal(a.q, b.q)
    assert np.abs(a.q).max() <= 0.2


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def test_validate_ladder_ok(capsys):
    code, out = run(["validate", "--builtin", "ladder", "--window", "-5:5"], capsys)
    assert code == 0
    assert "measure_balance" in out


def test_validate_small_window_is_usage_error(capsys):
    code, out = run(["validate", "--builtin", "path", "--window", "0:0"], capsys)
    assert code == 2
    assert "# error:" in out


def test_validate_same_rank_edge(tmp_path, capsys):
    spec = {
        "vertices": [{"id": "a", "rank": 0}, {"id": "b", "rank": 0}, {"id": "c", "rank": 1}],
        "edges": [{"from": "a", "to": "b"}, {"from": "a", "to": "c"}],
    }
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(spec))
    code, out = run(["validate", "--graph", str(path), "--format", "json"], capsys)
    assert code == 2
    assert json.loads(out)["error"]["type"] == "EdgeRankViolation"


def test_validate_unbalanced_graph_exit_1(tmp_path, capsys):
    spec = {
        "vertices": [{"id": "a", "rank": 0}, {"id": "b", "rank": 1}, {"id": "c", "rank": 1}],
        "edges": [{"from": "a", "to": "b", "mu_e": 0.9}, {"from": "a", "to": "c", "mu_e": 0.1}],
    }
    path = tmp_path / "g.json"
    path.write_text(json.dumps(spec))
    code, _ = run(["validate", "--graph", str(path)], capsys)
    assert code == 1


def test_unknown_subcommand_exit_2(capsys):
    assert main(["frobnicate"]) == 2


def test_missing_graph_exit_2(capsys):
    code, out = run(["simulate"], capsys)
    assert code == 2


# ---------------------------------------------------------------------------
# simulate and soliton
# ---------------------------------------------------------------------------

def test_simulate_equilibrium_constant_columns(capsys):
    code, out = run(
        ["simulate", "--builtin", "ladder", "--window", "-3:3", "--t-end", "0.2", "--step", "0.01"], capsys
    )
    assert code == 0
    header, rows, values = csv_body(out)
    assert header == ["t", "vertex_id", "q", "p"]
    n_vertices = len({r[1] for r in rows})
    assert values.shape[0] == 21 * n_vertices
    assert np.all(values[:, 1:] == 0.0)


def test_simulate_flaschka_variables(capsys):
    code, out = run(
        ["simulate", "--builtin", "path", "--window", "-3:3", "--t-end", "0.1", "--step", "0.05",
         "--variables", "a"],
        capsys,
    )
    assert code == 0
    header, _, values = csv_body(out)
    assert header == ["t", "edge_id", "a"]
    np.testing.assert_array_equal(values[:, 1], -0.5)


def test_simulate_blowup_exit_1(capsys):
    code, out = run(
        ["simulate", "--builtin", "path", "--window", "-3:3", "--init", "random:amp=1", "--t-end", "1",
         "--step", "0.01", "--bound", "0.5"],
        capsys,
    )
    assert code == 1
    assert "BlowUp" in out and "t_last" in out


def test_soliton_subcommand_matches_library(capsys):
    from gradedtoda.soliton import SolitonParams, soliton_state

    code, out = run(
        ["soliton", "--window", "-5:5", "--kappa", "1", "--gamma", "1", "--sigma", "1", "--t", "0.5",
         "--format", "json"],
        capsys,
    )
    assert code == 0
    doc = json.loads(out)
    q, p = soliton_state(SolitonParams((1.0,), (1.0,), (1,)), (-5, 5), 0.5)
    np.testing.assert_allclose([r["q"] for r in doc["records"]], q, rtol=1e-15)
    np.testing.assert_allclose([r["p"] for r in doc["records"]], p, rtol=1e-15)


# ---------------------------------------------------------------------------
# lift-compare and lax-check
# ---------------------------------------------------------------------------

def test_lift_compare_soliton(capsys):
    code, out = run(
        ["lift-compare", "--builtin", "ladder", "--window", "-20:20",
         "--init", "soliton:N=1,kappa=1,gamma=1,sigma=+1", "--t-end", "1", "--step", "1e-3",
         "--stride", "100"],
        capsys,
    )
    assert code == 0
    s = summary(out)
    assert float(s["max_discrepancy"]) <= 1e-6
    assert s["ok"] == "true"


def test_lift_compare_tolerance_exit_1(capsys):
    code, out = run(
        ["lift-compare", "--builtin", "ladder", "--window", "-10:10", "--init", "soliton:kappa=1",
         "--t-end", "0.5", "--step", "0.1", "--tol", "1e-14"],
        capsys,
    )
    assert code == 1
    assert summary(out)["ok"] == "false"


def test_lax_check_obstructed(capsys):
    code, out = run(
        ["lax-check", "--builtin", "ladder", "--window", "-15:15",
         "--init", "soliton:kappa=1,sigma=1,center=3", "--t-end", "4", "--step", "1e-2"],
        capsys,
    )
    assert code == 0
    s = summary(out)
    assert s["obstructed"] == "true"
    assert float(s["max_residual_projected"]) <= 1e-3


def test_lax_check_equilibrium_not_obstructed(capsys):
    code, out = run(
        ["lax-check", "--builtin", "ladder", "--window", "-5:5", "--t-end", "1", "--step", "1e-2"], capsys
    )
    assert code == 0
    assert summary(out)["obstructed"] == "false"


def test_lax_check_path_has_no_kernel(capsys):
    code, out = run(["lax-check", "--builtin", "path", "--window", "-5:5", "--t-end", "0.1"], capsys)
    assert code == 1
    assert "TrivialKernel" in out


# ---------------------------------------------------------------------------
# operators and spectra
# ---------------------------------------------------------------------------

def test_dump_operator_json_records(capsys):
    code, out = run(
        ["dump-operator", "--builtin", "ladder", "--window", "0:2", "--format", "json"], capsys
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["columns"] == ["row", "col", "value"]
    assert doc["records"]


def test_spectrum_kernel(capsys):
    code, out = run(
        ["spectrum", "--builtin", "ladder", "--window", "-3:3", "--kernel", "--beta", "0.25"], capsys
    )
    assert code == 0
    _, _, values = csv_body(out)
    np.testing.assert_allclose(values[:, 1], 0.25, atol=1e-14)


# ---------------------------------------------------------------------------
# config, output, reproducibility
# ---------------------------------------------------------------------------

def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"builtin": "ladder", "window": [-3, 3], "t_end": 0.1, "step": 0.05}))
    code, out = run(["simulate", "--config", str(cfg)], capsys)
    assert code == 0
    times = {r[0] for r in csv_body(out)[1]}
    assert len(times) == 3
    code, out = run(["simulate", "--config", str(cfg), "--step", "0.025"], capsys)
    assert code == 0
    assert len({r[0] for r in csv_body(out)[1]}) == 5


def test_config_unknown_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"builtin": "ladder", "frobnicate": 1}))
    assert main(["simulate", "--config", str(cfg)]) == 2


def test_out_file_equals_stdout(tmp_path, capsys):
    argv = ["simulate", "--builtin", "ladder", "--window", "-2:2", "--init", "random", "--seed", "7",
            "--t-end", "0.1", "--step", "0.05"]
    _, stdout_text = run(argv + ["--out", "-"], capsys)
    target = tmp_path / "o.csv"
    assert main(argv + ["--out", str(target)]) == 0
    assert target.read_text() == stdout_text


def test_identical_configs_byte_identical(tmp_path):
    argv = ["simulate", "--builtin", "diamond", "--level", "1", "--init", "random", "--seed", "11",
            "--t-end", "0.2", "--step", "0.01", "--format", "json"]
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(argv + ["--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    doc = json.loads(paths[0].read_text())
    assert set(doc) >= {"header", "columns", "records"}
    assert len(doc["header"]["config_sha256"]) == 64


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_every_subcommand_honors_format(fmt, capsys):
    base = ["--builtin", "ladder", "--window", "-2:2", "--format", fmt]
    for cmd in (["validate"], ["simulate", "--t-end", "0.01", "--step", "0.01"], ["dump-operator"],
                ["spectrum"], ["lift-compare", "--t-end", "0.01", "--step", "0.01"],
                ["lax-check", "--t-end", "0.02", "--step", "0.01"]):
        code, out = run(cmd + base, capsys)
        assert code == 0, cmd
        if fmt == "json":
            assert "header" in json.loads(out)
        else:
            assert out.startswith("# graded-toda")


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "gradedtoda.cli", "validate", "--builtin", "ladder", "--window", "-5:5"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("# graded-toda")
