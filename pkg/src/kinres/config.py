"""Run configuration: file format, defaults, and report-only validation.

One flat INI-style file drives every CLI subcommand. Sections mirror the
library modules ([system], [bath], [quadrature], [inversion], [heom]) plus
[sweep] for parameter grids and [output] for the destination directory.
Values left blank (or omitted) select the library defaults; the built-in
defaults reproduce the headline setup: omega_D^-1 = 100 fs, T = 300 K,
independent site baths (s = 2).

``validate_report`` checks a raw file without constructing any objects or
computing anything, so a broken config yields a readable violation list
instead of the first constructor exception.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, replace

from .bath import DebyeBath, LineshapeMode
from .dynamics import InversionSpec
from .errors import ValidationError
from .heom import HeomConfig
from .kernels import SystemSpec
from .quadrature import QuadMethod, QuadSpec

__all__ = ["SweepGrid", "RunConfig", "load_config", "validate_report",
           "DEFAULT_CONFIG_TEXT"]

DEFAULT_CONFIG_TEXT = """\
[system]
eps12 = 0.0
j_coupling = 20.0
s_corr = 2

[bath]
reorganization = 100.0
omega_d_inv_fs = 100.0
temperature = 300.0
n_matsubara =
lineshape = high_temperature

[quadrature]
method = auto
n_points = 100000
t_max =
decay_scale =
seed = 0
target_rel_stderr =

[inversion]
sigma =
n_terms = 2000
t_scale =
tol = 1e-8

[heom]
depth = 10
n_matsubara = 2
dt =
t_final = 4000.0
prep_time =
gamma_cut =

[sweep]
lambdas =
temperatures =
t_final = 4000.0
t_step = 10.0

[output]
dir = out
"""

_METHODS = {
    "auto": None,
    "adaptive": QuadMethod.ADAPTIVE_1D,
    "tensor": QuadMethod.TENSOR_GAUSS,
    "qmc": QuadMethod.QUASI_MONTE_CARLO,
}
_MODES = {
    "high_temperature": LineshapeMode.HIGH_TEMPERATURE,
    "full_matsubara": LineshapeMode.FULL_MATSUBARA,
}


@dataclass(frozen=True)
class SweepGrid:
    """Parameter grids for sweep-style commands.

    None means "not specified" (commands substitute their canonical grid);
    an explicitly empty list is kept and rejected at the point of use.
    """

    lambdas: tuple[float, ...] | None = None
    temperatures: tuple[float, ...] | None = None
    t_final: float = 4000.0
    t_step: float = 10.0

    def __post_init__(self):
        if not (self.t_final > 0.0):
            raise ValidationError(
                f"sweep t_final must be positive, got {self.t_final}")
        if not (0.0 < self.t_step <= self.t_final):
            raise ValidationError(
                f"sweep t_step must lie in (0, t_final], got {self.t_step}")


@dataclass(frozen=True)
class RunConfig:
    system: SystemSpec = field(default_factory=lambda: SystemSpec(0.0, 20.0, 2))
    bath: DebyeBath = field(default_factory=lambda: DebyeBath(100.0, 0.01, 300.0))
    lineshape: LineshapeMode = LineshapeMode.HIGH_TEMPERATURE
    quadrature: QuadSpec = field(default_factory=QuadSpec)
    inversion: InversionSpec = field(default_factory=InversionSpec)
    heom: HeomConfig = field(default_factory=HeomConfig)
    sweep: SweepGrid = field(default_factory=SweepGrid)
    output_dir: str = "out"

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, quadrature=replace(self.quadrature, seed=seed))


def _parser_for(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(DEFAULT_CONFIG_TEXT)
    if path is not None:
        if not os.path.exists(path):
            raise ValidationError(f"config file not found: {path}")
        with open(path) as fh:
            cp.read_file(fh, source=path)
    return cp


def _get(cp, section, key, conv, blank=None):
    raw = cp.get(section, key, fallback="").strip()
    if raw == "":
        return blank
    return conv(raw)


def _float_list(raw: str) -> tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",")]
    return tuple(float(p) for p in parts if p != "")


def load_config(path: str | None = None) -> RunConfig:
    """Build a RunConfig from a file merged over the defaults."""
    cp = _parser_for(path)
    system = SystemSpec(
        eps12=cp.getfloat("system", "eps12"),
        j_coupling=cp.getfloat("system", "j_coupling"),
        s_corr=cp.getint("system", "s_corr"))
    omega_inv = cp.getfloat("bath", "omega_d_inv_fs")
    bath = DebyeBath.from_inverse_time(
        cp.getfloat("bath", "reorganization"), omega_inv,
        cp.getfloat("bath", "temperature"),
        _get(cp, "bath", "n_matsubara", int))
    mode_key = cp.get("bath", "lineshape").strip().lower()
    if mode_key not in _MODES:
        raise ValidationError(
            f"unknown lineshape mode {mode_key!r}; "
            f"choose one of {sorted(_MODES)}")
    method_key = cp.get("quadrature", "method").strip().lower()
    if method_key not in _METHODS:
        raise ValidationError(
            f"unknown quadrature method {method_key!r}; "
            f"choose one of {sorted(_METHODS)}")
    quad = QuadSpec(
        method=_METHODS[method_key],
        n_points=cp.getint("quadrature", "n_points"),
        t_max=_get(cp, "quadrature", "t_max", float),
        decay_scale=_get(cp, "quadrature", "decay_scale", float),
        seed=cp.getint("quadrature", "seed"),
        target_rel_stderr=_get(cp, "quadrature", "target_rel_stderr", float))
    inv = InversionSpec(
        sigma=_get(cp, "inversion", "sigma", float),
        n_terms=cp.getint("inversion", "n_terms"),
        t_scale=_get(cp, "inversion", "t_scale", float),
        tol=cp.getfloat("inversion", "tol"))
    heom = HeomConfig(
        depth=cp.getint("heom", "depth"),
        n_matsubara=cp.getint("heom", "n_matsubara"),
        dt=_get(cp, "heom", "dt", float),
        t_final=cp.getfloat("heom", "t_final"),
        prep_time=_get(cp, "heom", "prep_time", float),
        gamma_cut=_get(cp, "heom", "gamma_cut", float))
    sweep = SweepGrid(
        lambdas=_get(cp, "sweep", "lambdas", _float_list),
        temperatures=_get(cp, "sweep", "temperatures", _float_list),
        t_final=cp.getfloat("sweep", "t_final"),
        t_step=cp.getfloat("sweep", "t_step"))
    return RunConfig(system=system, bath=bath, lineshape=_MODES[mode_key],
                     quadrature=quad, inversion=inv, heom=heom, sweep=sweep,
                     output_dir=cp.get("output", "dir").strip())


def _check_number(report, section, key, raw, pred, msg, conv=float):
    try:
        val = conv(raw)
    except ValueError:
        report.append(f"[{section}] {key} = {raw!r} is not a number")
        return None
    if not pred(val):
        report.append(f"[{section}] {key} = {raw}: {msg}")
    return val


def validate_report(path: str | None = None) -> list[str]:
    """All constraint violations in a config, without computing anything.

    Returns an empty list for a valid configuration. Unknown sections or
    keys are reported as violations so typos do not silently fall back to
    defaults.
    """
    report: list[str] = []
    try:
        cp = _parser_for(path)
    except (ValidationError, configparser.Error) as exc:
        return [str(exc)]
    known = configparser.ConfigParser()
    known.read_string(DEFAULT_CONFIG_TEXT)
    for section in cp.sections():
        if not known.has_section(section):
            report.append(f"unknown section [{section}]")
            continue
        for key in cp.options(section):
            if not known.has_option(section, key):
                report.append(f"unknown key {key!r} in [{section}]")

    def raw(section, key):
        return cp.get(section, key, fallback="").strip()

    _check_number(report, "system", "eps12", raw("system", "eps12"),
                  math.isfinite, "must be finite")
    _check_number(report, "system", "j_coupling", raw("system", "j_coupling"),
                  lambda v: v >= 0.0, "must be >= 0")
    _check_number(report, "system", "s_corr", raw("system", "s_corr"),
                  lambda v: v in (2, 4), "must be 2 or 4", conv=int)
    _check_number(report, "bath", "reorganization",
                  raw("bath", "reorganization"),
                  lambda v: v >= 0.0, "must be >= 0 cm^-1")
    _check_number(report, "bath", "omega_d_inv_fs",
                  raw("bath", "omega_d_inv_fs"),
                  lambda v: v > 0.0, "must be positive (fs)")
    _check_number(report, "bath", "temperature", raw("bath", "temperature"),
                  lambda v: v > 0.0, "must be positive (K)")
    if raw("bath", "n_matsubara"):
        _check_number(report, "bath", "n_matsubara",
                      raw("bath", "n_matsubara"),
                      lambda v: v >= 0, "must be >= 0", conv=int)
    if raw("bath", "lineshape").lower() not in _MODES:
        report.append(f"[bath] lineshape = {raw('bath', 'lineshape')!r}: "
                      f"must be one of {sorted(_MODES)}")
    if raw("quadrature", "method").lower() not in _METHODS:
        report.append(f"[quadrature] method = {raw('quadrature', 'method')!r}: "
                      f"must be one of {sorted(_METHODS)}")
    _check_number(report, "quadrature", "n_points",
                  raw("quadrature", "n_points"),
                  lambda v: v > 0, "must be positive", conv=int)
    for key, pred, msg in (("t_max", lambda v: v > 0.0, "must be positive"),
                           ("decay_scale", lambda v: v > 0.0, "must be positive"),
                           ("target_rel_stderr", lambda v: v > 0.0,
                            "must be positive")):
        if raw("quadrature", key):
            _check_number(report, "quadrature", key, raw("quadrature", key),
                          pred, msg)
    _check_number(report, "quadrature", "seed", raw("quadrature", "seed"),
                  lambda v: v >= 0, "must be >= 0", conv=int)
    if raw("inversion", "sigma"):
        _check_number(report, "inversion", "sigma", raw("inversion", "sigma"),
                      lambda v: v > 0.0, "must be positive")
    _check_number(report, "inversion", "n_terms", raw("inversion", "n_terms"),
                  lambda v: v >= 8, "must be >= 8", conv=int)
    _check_number(report, "inversion", "tol", raw("inversion", "tol"),
                  lambda v: v > 0.0, "must be positive")
    _check_number(report, "heom", "depth", raw("heom", "depth"),
                  lambda v: v >= 1, "must be >= 1", conv=int)
    _check_number(report, "heom", "n_matsubara", raw("heom", "n_matsubara"),
                  lambda v: v >= 0, "must be >= 0", conv=int)
    _check_number(report, "heom", "t_final", raw("heom", "t_final"),
                  lambda v: v > 0.0, "must be positive")
    for key in ("dt", "prep_time", "gamma_cut"):
        if raw("heom", key):
            low = 0.0 if key == "prep_time" else None
            pred = (lambda v: v >= 0.0) if low == 0.0 else (lambda v: v > 0.0)
            _check_number(report, "heom", key, raw("heom", key), pred,
                          "must be positive" if low is None else "must be >= 0")
    t_final = _check_number(report, "sweep", "t_final", raw("sweep", "t_final"),
                            lambda v: v > 0.0, "must be positive")
    if raw("sweep", "t_step"):
        _check_number(report, "sweep", "t_step", raw("sweep", "t_step"),
                      lambda v: v > 0.0 and (t_final is None or v <= t_final),
                      "must lie in (0, t_final]")
    for key, positive in (("lambdas", False), ("temperatures", True)):
        txt = raw("sweep", key)
        if txt:
            try:
                vals = _float_list(txt)
            except ValueError:
                report.append(f"[sweep] {key} = {txt!r} is not a number list")
                continue
            if not vals:
                report.append(f"[sweep] {key} is empty")
            bad = [v for v in vals if (v <= 0.0 if positive else v < 0.0)]
            if bad:
                report.append(f"[sweep] {key} contains non-physical values {bad}")
    out_dir = raw("output", "dir") or "out"
    probe = out_dir
    while probe and not os.path.exists(probe):
        probe = os.path.dirname(probe)
    if not os.access(probe or ".", os.W_OK):
        report.append(f"[output] dir = {out_dir!r} is not writable")
    return report
