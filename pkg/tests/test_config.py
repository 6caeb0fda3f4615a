"""Config parsing, defaults, and the report-only validator."""

import pytest

from kinres.bath import LineshapeMode
from kinres.config import RunConfig, SweepGrid, load_config, validate_report
from kinres.errors import ValidationError
from kinres.quadrature import QuadMethod


def test_defaults_reproduce_headline_setup():
    cfg = load_config(None)
    assert cfg.system.eps12 == 0.0
    assert cfg.system.j_coupling == 20.0
    assert cfg.system.s_corr == 2
    assert cfg.bath.reorganization == 100.0
    assert cfg.bath.omega_d == pytest.approx(0.01)
    assert cfg.bath.temperature == 300.0
    assert cfg.lineshape is LineshapeMode.HIGH_TEMPERATURE
    assert cfg.quadrature.method is None
    assert cfg.quadrature.t_max is None
    assert cfg.inversion.sigma is None
    assert cfg.sweep.lambdas is None
    assert cfg.sweep.temperatures is None
    assert cfg.output_dir == "out"


def test_file_overrides_merge_over_defaults(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(
        "[system]\neps12 = 100.0\n"
        "[bath]\nlineshape = full_matsubara\n"
        "[quadrature]\nmethod = qmc\nn_points = 4096\n"
        "[sweep]\nlambdas = 1, 10, 100\n")
    cfg = load_config(str(path))
    assert cfg.system.eps12 == 100.0
    assert cfg.system.j_coupling == 20.0  # untouched default
    assert cfg.lineshape is LineshapeMode.FULL_MATSUBARA
    assert cfg.quadrature.method is QuadMethod.QUASI_MONTE_CARLO
    assert cfg.quadrature.n_points == 4096
    assert cfg.sweep.lambdas == (1.0, 10.0, 100.0)


def test_blank_value_selects_library_default(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[quadrature]\nt_max =\n[heom]\ndt =\n")
    cfg = load_config(str(path))
    assert cfg.quadrature.t_max is None
    assert cfg.heom.dt is None


def test_with_seed_touches_only_quadrature():
    cfg = load_config(None)
    seeded = cfg.with_seed(7)
    assert seeded.quadrature.seed == 7
    assert seeded.system == cfg.system
    assert seeded.heom == cfg.heom


def test_missing_file():
    with pytest.raises(ValidationError):
        load_config("/nonexistent/run.ini")
    report = validate_report("/nonexistent/run.ini")
    assert len(report) == 1 and "not found" in report[0]


def test_validate_report_clean_for_defaults():
    assert validate_report(None) == []


def test_validate_report_collects_violations(tmp_path):
    path = tmp_path / "broken.ini"
    path.write_text(
        "[system]\ns_corr = 3\n"
        "[bath]\nomega_d_inv_fs = 0\nlineshape = banana\n"
        "[quadrature]\nmethod = dartboard\nn_points = -4\n"
        "[inversion]\nn_terms = 4\n"
        "[sweep]\nlambdas = ,\ntemperatures = 300, -5\n"
        "[turbo]\nknob = 11\n"
        "[heom]\nwarp = 9\n")
    report = validate_report(str(path))
    joined = "\n".join(report)
    assert "s_corr" in joined and "must be 2 or 4" in joined
    assert "omega_d_inv_fs" in joined
    assert "lineshape" in joined
    assert "method" in joined
    assert "n_points" in joined
    assert "n_terms" in joined
    assert "lambdas" in joined and "empty" in joined
    assert "temperatures" in joined and "non-physical" in joined
    assert "unknown section [turbo]" in joined
    assert "unknown key 'warp'" in joined
    # a valid setting in the same file is not reported
    assert "eps12" not in joined


def test_validate_report_flags_non_numeric(tmp_path):
    path = tmp_path / "broken.ini"
    path.write_text("[bath]\ntemperature = warm\n")
    report = validate_report(str(path))
    assert any("temperature" in line and "not a number" in line
               for line in report)


def test_sweep_grid_validation():
    with pytest.raises(ValidationError):
        SweepGrid(t_final=-1.0)
    with pytest.raises(ValidationError):
        SweepGrid(t_final=100.0, t_step=200.0)


def test_runconfig_defaults_are_self_consistent():
    cfg = RunConfig()
    assert cfg.system.j_coupling == 20.0
    assert cfg.bath.omega_d == pytest.approx(0.01)
