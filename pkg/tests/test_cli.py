"""End-to-end CLI behavior through click's test runner."""

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from kinres.bath import DebyeBath, LineshapeEvaluator
from kinres.cli import main
from kinres.kernels import Direction, SystemSpec, k2


@pytest.fixture()
def runner():
    return CliRunner()


def _read_table(path):
    """Comment header, column names, and float-ish rows of one CSV."""
    comments, rows = [], []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                comments.append(line)
            elif line:
                rows.append(line.split(","))
    return comments, rows[0], rows[1:]


def _config(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text)
    return str(path)


def test_validate_default_config_ok(runner):
    result = runner.invoke(main, ["validate"])
    assert result.exit_code == 0
    assert "configuration ok" in result.output


def test_validate_reports_and_exits_2(runner, tmp_path):
    cfg = _config(tmp_path, "[system]\ns_corr = 3\n")
    result = runner.invoke(main, ["--config", cfg, "validate"])
    assert result.exit_code == 2
    assert "s_corr" in result.output


def test_thread_count_guard(runner):
    result = runner.invoke(main, ["--threads", "0", "validate"])
    assert result.exit_code == 2


def test_missing_config_file(runner):
    result = runner.invoke(main, ["--config", "/no/such/file.ini", "validate"])
    assert result.exit_code == 2


def test_bath_table(runner, tmp_path):
    cfg = _config(tmp_path, "[sweep]\nt_final = 100.0\nt_step = 10.0\n")
    out = tmp_path / "o"
    result = runner.invoke(main, ["--config", cfg, "--out", str(out), "bath"])
    assert result.exit_code == 0, result.output
    path = result.output.strip()
    comments, header, rows = _read_table(path)
    assert header == ["t_fs", "re_g", "im_g", "mode"]
    assert len(rows) == 11
    assert rows[0][:2] == ["0", "0"]
    assert all(r[3] == "high_temperature" for r in rows)
    assert comments[0].startswith("# generated:")
    assert any("lambda_cm1" in c for c in comments)


def test_kernel_prints_flux_value(runner, tmp_path):
    result = runner.invoke(main, ["kernel", "--order", "2", "--times", "80"])
    assert result.exit_code == 0, result.output
    printed = float(result.output.strip())
    g = LineshapeEvaluator(DebyeBath(100.0, 0.01, 300.0)).fast_evaluator(8000.0)
    expected = k2(80.0, Direction.FORWARD, SystemSpec(0.0, 20.0), g)
    assert printed == pytest.approx(expected, rel=1e-6)


def test_kernel_argument_errors(runner):
    result = runner.invoke(main, ["kernel", "--order", "4", "--times", "1,2"])
    assert result.exit_code == 2
    result = runner.invoke(main, ["kernel", "--order", "2", "--times", "zap"])
    assert result.exit_code == 2
    result = runner.invoke(main, ["kernel", "--order", "2", "--times", "50",
                                  "--direction", "sideways"])
    assert result.exit_code == 2


def test_rates_sweep_schema(runner, tmp_path):
    cfg = _config(tmp_path,
                  "[quadrature]\nn_points = 2000\n"
                  "[sweep]\nlambdas = 1, 50\n")
    out = tmp_path / "o"
    result = runner.invoke(main, ["--config", cfg, "--out", str(out),
                                  "--threads", "2", "rates"])
    assert result.exit_code == 0, result.output
    _, header, rows = _read_table(result.output.strip())
    assert header == ["lambda_cm1", "order", "direction", "value_fs1",
                      "stderr", "normalized"]
    assert len(rows) == 12  # 2 lambdas x 3 orders x 2 directions
    anchored = [r for r in rows if r[0] == "1" and r[1] == "2"
                and r[2] == "forward"]
    assert float(anchored[0][5]) == 1.0
    # the unbiased pair has identical forward and backward channels
    fwd = [r for r in rows if r[2] == "forward"]
    bwd = [r for r in rows if r[2] == "backward"]
    assert [r[3] for r in fwd] == [r[3] for r in bwd]


def test_rates_without_anchor_leaves_normalized_nan(runner, tmp_path):
    cfg = _config(tmp_path,
                  "[quadrature]\nn_points = 1000\n"
                  "[sweep]\nlambdas = 50, 200\n")
    result = runner.invoke(main, ["--config", cfg, "--out",
                                  str(tmp_path / "o"), "rates"])
    assert result.exit_code == 0, result.output
    _, _, rows = _read_table(result.output.strip())
    assert all(r[5] == "nan" for r in rows)


def test_rates_empty_sweep_exits_2(runner, tmp_path):
    cfg = _config(tmp_path, "[sweep]\nlambdas = ,\n")
    result = runner.invoke(main, ["--config", cfg, "--out",
                                  str(tmp_path / "o"), "rates"])
    assert result.exit_code == 2
    assert "empty" in result.output


def test_resum_roundtrip(runner, tmp_path):
    src = tmp_path / "in.csv"
    k2v, k4v, k6v = 5.6e-4, -3.7e-5, 2.7e-6
    src.write_text(
        "direction,z_re,z_im,k2_re,k2_im,k4_re,k4_im,k6_re,k6_im\n"
        f"forward,0,0,{k2v},0,{k4v},0,{k6v},0\n")
    result = runner.invoke(main, ["--out", str(tmp_path / "o"), "resum",
                                  "--rates-csv", str(src)])
    assert result.exit_code == 0, result.output
    _, header, rows = _read_table(result.output.strip())
    assert header[:3] == ["direction", "z_re", "z_im"]
    row = rows[0]
    assert row[0] == "forward"
    assert float(row[3]) == pytest.approx(k2v ** 2 / (k2v - k4v), rel=1e-10)
    assert float(row[7]) == pytest.approx(-k4v / k2v, rel=1e-10)


def test_resum_rejects_malformed_input(runner, tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("direction,z_re\nforward,0\n")
    result = runner.invoke(main, ["--out", str(tmp_path / "o"), "resum",
                                  "--rates-csv", str(src)])
    assert result.exit_code == 2
    assert "missing columns" in result.output


def test_dynamics_table(runner, tmp_path):
    cfg = _config(tmp_path,
                  "[quadrature]\nn_points = 20000\n"
                  "[sweep]\nt_final = 300.0\nt_step = 15.0\n")
    result = runner.invoke(main, ["--config", cfg, "--out",
                                  str(tmp_path / "o"), "dynamics"])
    assert result.exit_code == 0, result.output
    _, header, rows = _read_table(result.output.strip())
    assert header == ["t_fs", "p1_order2", "p1_resum4", "p1_resum6"]
    assert len(rows) == 21
    assert [float(v) for v in rows[0]] == [0.0, 1.0, 1.0, 1.0]
    body = np.array([[float(v) for v in r] for r in rows])
    assert body[:, 1:].min() > -1e-3 and body[:, 1:].max() < 1.0 + 1e-9


def test_equilibrium_table(runner, tmp_path):
    cfg = _config(tmp_path, "[quadrature]\nn_points = 2000\n")
    result = runner.invoke(main, ["--config", cfg, "--out",
                                  str(tmp_path / "o"), "equilibrium"])
    assert result.exit_code == 0, result.output
    _, header, rows = _read_table(result.output.strip())
    assert header == ["T_K", "p_eq_fgr", "p_eq_resum4", "p_eq_resum6"]
    assert len(rows) == 1
    # the default system is unbiased, so every order lands on one half
    assert all(float(v) == pytest.approx(0.5, abs=1e-9) for v in rows[0][1:])


def test_exact_trajectory_is_tagged(runner, tmp_path):
    cfg = _config(tmp_path,
                  "[heom]\ndepth = 4\n"
                  "[sweep]\nt_final = 200.0\nt_step = 20.0\n")
    result = runner.invoke(main, ["--config", cfg, "--out",
                                  str(tmp_path / "o"), "exact",
                                  "--kind", "trajectory"])
    assert result.exit_code == 0, result.output
    _, header, rows = _read_table(result.output.strip())
    assert header == ["t_fs", "p1", "provenance"]
    assert all(r[2] == "exact" for r in rows)
    assert float(rows[0][1]) == pytest.approx(1.0, abs=1e-6)


def test_figure_writes_data_manifest_and_png(runner, tmp_path):
    cfg = _config(tmp_path,
                  "[quadrature]\nn_points = 2000\n"
                  "[sweep]\nlambdas = 1, 100\n")
    out = tmp_path / "o"
    result = runner.invoke(main, ["--config", cfg, "--out", str(out),
                                  "figure", "--id", "fig2a"])
    assert result.exit_code == 0, result.output
    paths = result.output.split()
    assert any(p.endswith("fig2a.csv") for p in paths)
    assert any(p.endswith("fig2a.png") for p in paths)
    manifest = json.loads((out / "fig2a_manifest.json").read_text())
    assert manifest["figure"] == "fig2a"
    assert manifest["failed"] == {}
    # data rows drive the plot; spot-check the normalization anchor
    _, header, rows = _read_table(str(out / "fig2a.csv"))
    k2n = header.index("k2_norm")
    anchor = [r for r in rows if float(r[0]) == 1.0][0]
    assert float(anchor[k2n]) == 1.0


def test_figure_no_render_skips_png(runner, tmp_path):
    cfg = _config(tmp_path,
                  "[quadrature]\nn_points = 1000\n"
                  "[sweep]\nlambdas = 1, 10\n")
    out = tmp_path / "o"
    result = runner.invoke(main, ["--config", cfg, "--out", str(out),
                                  "figure", "--id", "fig2a", "--no-render"])
    assert result.exit_code == 0, result.output
    assert not (out / "fig2a.png").exists()
    assert (out / "fig2a.csv").exists()


def test_outputs_reproducible_across_threads(runner, tmp_path):
    cfg = _config(tmp_path,
                  "[quadrature]\nn_points = 2000\n"
                  "[sweep]\nlambdas = 1, 20, 400\n")

    def run(out, threads):
        result = runner.invoke(main, ["--config", cfg, "--seed", "5",
                                      "--threads", str(threads),
                                      "--out", out, "rates"])
        assert result.exit_code == 0, result.output
        with open(result.output.strip()) as fh:
            return [ln for ln in fh if not ln.startswith("# generated")]

    first = run(str(tmp_path / "a"), 1)
    second = run(str(tmp_path / "b"), 3)
    assert first == second


def test_seed_changes_sampled_orders_only(runner, tmp_path):
    cfg = _config(tmp_path,
                  "[quadrature]\nn_points = 2000\n[sweep]\nlambdas = 100,\n")

    def values(out, seed):
        result = runner.invoke(main, ["--config", cfg, "--seed", str(seed),
                                      "--out", out, "rates"])
        assert result.exit_code == 0, result.output
        _, _, rows = _read_table(result.output.strip())
        return {(r[1], r[2]): r[3] for r in rows}

    a = values(str(tmp_path / "a"), 1)
    b = values(str(tmp_path / "b"), 2)
    assert a[("2", "forward")] == b[("2", "forward")]
    assert a[("4", "forward")] == b[("4", "forward")]
    assert a[("6", "forward")] != b[("6", "forward")]
