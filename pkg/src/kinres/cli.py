"""Command-line front end: tables, sweeps, figures, and config checks.

Every data-producing subcommand writes delimited output under the --out
directory with a provenance header and prints the written paths. Exit
status 2 flags configuration or input problems, 3 flags a computation
that failed to converge or hit a numerical singularity.
"""

from __future__ import annotations

import os
import sys
from dataclasses import replace

import click
import numpy as np

from .bath import LineshapeEvaluator
from .config import RunConfig, load_config, validate_report
from .csvio import write_csv
from .dynamics import equilibrium_population, population_trajectory
from .errors import KinresError, ValidationError
from .figures import FIGURE_IDS, run_figure
from .heom import heom_equilibrium, heom_propagate
from .kernels import Direction, k2, k4, k6
from .quadrature import QuadMethod, laplace_rate, normalized_rate_curve
from .resummation import cf_coefficients, cf_resum

_CANONICAL_LAMBDAS = tuple(np.geomspace(1.0, 1000.0, 12))


def _load(ctx) -> RunConfig:
    opts = ctx.obj
    cfg = load_config(opts["config_path"])
    if opts["seed"] is not None:
        cfg = cfg.with_seed(opts["seed"])
    if opts["out_dir"] is not None:
        cfg = replace(cfg, output_dir=opts["out_dir"])
    return cfg


def _guard(ctx, body):
    """Map library failures onto the documented exit codes."""
    try:
        body()
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(2)
    except KinresError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(3)


def _time_grid(cfg: RunConfig) -> np.ndarray:
    sweep = cfg.sweep
    return np.arange(0.0, sweep.t_final + 0.5 * sweep.t_step, sweep.t_step)


def _rate_specs(cfg: RunConfig):
    from .figures import _rate_specs as specs
    return specs(cfg.quadrature)


def _evaluator(cfg: RunConfig, bath=None):
    from .figures import _evaluator as ev
    return ev(cfg, bath if bath is not None else cfg.bath)


def _system_params(cfg: RunConfig) -> dict:
    from .figures import _common_params
    return _common_params(cfg, cfg.system, cfg.bath)


@click.group()
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="INI file overriding the built-in defaults.")
@click.option("--seed", type=int, default=None,
              help="Override the sampling seed.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker threads for sweep points.")
@click.option("--out", "out_dir", default=None,
              type=click.Path(file_okay=False),
              help="Output directory (default from config, 'out').")
@click.pass_context
def main(ctx, config_path, seed, threads, out_dir):
    """Rate kernels, resummed transfer rates, and population dynamics of
    the two-site donor-acceptor model with Debye baths."""
    if threads < 1:
        click.echo("error: --threads must be >= 1", err=True)
        ctx.exit(2)
    ctx.obj = {"config_path": config_path, "seed": seed,
               "threads": threads, "out_dir": out_dir}


@main.command()
@click.pass_context
def bath(ctx):
    """Write the bath lineshape g(t) on the sweep time grid."""

    def body():
        cfg = _load(ctx)
        grid = _time_grid(cfg)
        vals = LineshapeEvaluator(cfg.bath, cfg.lineshape).values(grid)
        rows = [(t, v.real, v.imag, cfg.lineshape.value)
                for t, v in zip(grid, vals)]
        params = _system_params(cfg)
        path = write_csv(os.path.join(cfg.output_dir, "bath.csv"),
                         ("t_fs", "re_g", "im_g", "mode"), rows, params)
        click.echo(path)

    _guard(ctx, body)


def _parse_direction(name: str) -> Direction:
    try:
        return Direction[name.upper()]
    except KeyError:
        raise ValidationError(
            f"direction must be forward or backward, got {name!r}")


@main.command()
@click.option("--order", type=click.Choice(["2", "4", "6"]), required=True)
@click.option("--times", required=True,
              help="Comma-separated interval lengths in fs "
                   "(1, 3, or 5 values for orders 2, 4, 6).")
@click.option("--direction", default="forward", show_default=True)
@click.pass_context
def kernel(ctx, order, times, direction):
    """Print one pointwise kernel flux value in fs^-1."""

    def body():
        cfg = _load(ctx)
        d = _parse_direction(direction)
        try:
            taus = [float(x) for x in times.split(",") if x.strip()]
        except ValueError as exc:
            raise ValidationError(f"bad --times value: {exc}")
        n_expected = int(order) - 1
        if len(taus) != n_expected:
            raise ValidationError(
                f"order {order} takes {n_expected} interval lengths, "
                f"got {len(taus)}")
        g = _evaluator(cfg)
        fn = {2: k2, 4: k4, 6: k6}[int(order)]
        click.echo(f"{fn(*taus, d, cfg.system, g):.12g}")

    _guard(ctx, body)


@main.command()
@click.pass_context
def rates(ctx):
    """Sweep the reorganization energy: rates per order and direction."""

    def body():
        cfg = _load(ctx)
        lambdas = cfg.sweep.lambdas
        if lambdas is None:
            lambdas = _CANONICAL_LAMBDAS
        elif len(lambdas) == 0:
            raise ValidationError("referenced sweep 'lambdas' is empty")
        specs = _rate_specs(cfg)
        biased = cfg.system.eps12 != 0.0

        def point(lam):
            bath_ = cfg.bath.with_reorganization(lam)
            g = _evaluator(cfg, bath_)
            return {(o, d): laplace_rate(o, d, 0.0, cfg.system, g, specs[o])
                    for o in (2, 4, 6) for d in Direction}

        from .figures import _run_points
        results, failures = _run_points(tuple(lambdas), point,
                                        ctx.obj["threads"])
        if failures:
            lam, err = next(iter(failures.items()))
            raise type(err)(f"rate sweep failed at lambda={lam}: {err}") \
                from err
        rows = []
        for o in (2, 4, 6):
            for d in Direction:
                vals = np.array([results[lam][(o, d)].value
                                 for lam in lambdas])
                if biased or 1.0 in lambdas:
                    norm = normalized_rate_curve(np.array(lambdas), vals,
                                                 biased=biased)
                else:
                    norm = np.full(len(vals), np.nan)
                for lam, r, nv in zip(lambdas, vals, norm):
                    rr = results[lam][(o, d)]
                    rows.append((lam, o, d.name.lower(), float(r),
                                 rr.stderr, float(nv)))
        params = _system_params(cfg)
        del params["lambda_cm1"]
        path = write_csv(
            os.path.join(cfg.output_dir, "rates.csv"),
            ("lambda_cm1", "order", "direction", "value_fs1", "stderr",
             "normalized"), rows, params)
        click.echo(path)

    _guard(ctx, body)


def _read_rate_rows(path):
    import csv as _csv
    with open(path, newline="") as fh:
        rows = [r for r in _csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: no rows")
    header = [c.strip() for c in rows[0]]
    required = ("direction", "z_re", "z_im", "k2_re", "k2_im",
                "k4_re", "k4_im", "k6_re", "k6_im")
    missing = [c for c in required if c not in header]
    if missing:
        raise ValidationError(
            f"{path}: missing columns {missing}; expected {required}")
    idx = {c: header.index(c) for c in required}
    out = []
    for r in rows[1:]:
        try:
            out.append((
                _parse_direction(r[idx["direction"]]),
                complex(float(r[idx["z_re"]]), float(r[idx["z_im"]])),
                complex(float(r[idx["k2_re"]]), float(r[idx["k2_im"]])),
                complex(float(r[idx["k4_re"]]), float(r[idx["k4_im"]])),
                complex(float(r[idx["k6_re"]]), float(r[idx["k6_im"]])),
            ))
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{path}: bad row {r}: {exc}")
    return out


@main.command()
@click.option("--rates-csv", "rates_csv", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Input with columns direction, z_re, z_im, k2_re, k2_im, "
                   "k4_re, k4_im, k6_re, k6_im.")
@click.pass_context
def resum(ctx, rates_csv):
    """Continued-fraction resummation of tabulated partial rates."""

    def body():
        cfg = _load(ctx)
        rows = []
        for d, z, k2z, k4z, k6z in _read_rate_rows(rates_csv):
            co6 = cf_coefficients(k2z, k4z, k6z, direction=d, z=z)
            co4 = cf_coefficients(k2z, k4z, direction=d, z=z)
            r4 = cf_resum(co4, k2z).value
            r6 = cf_resum(co6, k2z).value
            rows.append((d.name.lower(), z.real, z.imag,
                         r4.real, r4.imag, r6.real, r6.imag,
                         co6.deltas[0].real, co6.deltas[0].imag,
                         co6.deltas[1].real, co6.deltas[1].imag))
        path = write_csv(
            os.path.join(cfg.output_dir, "resum.csv"),
            ("direction", "z_re", "z_im",
             "k_resum_order4_re", "k_resum_order4_im",
             "k_resum_order6_re", "k_resum_order6_im",
             "delta2_re", "delta2_im", "delta4_re", "delta4_im"),
            rows, {"input": os.path.abspath(rates_csv)})
        click.echo(path)

    _guard(ctx, body)


@main.command()
@click.option("--exact", "with_exact", is_flag=True,
              help="Append the hierarchy reference trajectory.")
@click.pass_context
def dynamics(ctx, with_exact):
    """Donor population vs time at orders 2, 4, and 6."""

    def body():
        cfg = _load(ctx)
        t_grid = _time_grid(cfg)
        g = _evaluator(cfg)
        quad = cfg.quadrature
        inv_det = replace(cfg.inversion, tol=max(cfg.inversion.tol, 1e-7))
        # resummed kernels carry quadrature noise along the contour, so their
        # inversion target is the trajectory accuracy, not the order-2 one
        inv_resum = replace(cfg.inversion, tol=max(cfg.inversion.tol, 1e-4))
        spec4 = replace(quad, method=QuadMethod.TENSOR_GAUSS,
                        n_points=max(48, _rate_specs(cfg)[4].n_points))
        p2 = population_trajectory(2, cfg.system, g,
                                   replace(quad, method=None), inv_det,
                                   t_grid)
        p4 = population_trajectory(4, cfg.system, g, spec4, inv_resum, t_grid)
        p6 = population_trajectory(
            6, cfg.system, g,
            replace(quad, method=QuadMethod.QUASI_MONTE_CARLO), inv_resum,
            t_grid)
        columns = ["t_fs", "p1_order2", "p1_resum4", "p1_resum6"]
        series = [t_grid, p2.p_donor, p4.p_donor, p6.p_donor]
        if with_exact:
            traj = heom_propagate(cfg.system, cfg.bath,
                                  replace(cfg.heom,
                                          t_final=float(t_grid[-1])))
            series.append(np.interp(t_grid, traj.times, traj.p_donor))
            columns.append("p1_exact")
        path = write_csv(os.path.join(cfg.output_dir, "dynamics.csv"),
                         columns, zip(*series), _system_params(cfg))
        click.echo(path)

    _guard(ctx, body)


def _temperatures(cfg: RunConfig):
    temps = cfg.sweep.temperatures
    if temps is None:
        return (cfg.bath.temperature,)
    if len(temps) == 0:
        raise ValidationError("referenced sweep 'temperatures' is empty")
    return tuple(temps)


@main.command()
@click.option("--exact", "with_exact", is_flag=True,
              help="Append the hierarchy equilibrium population.")
@click.pass_context
def equilibrium(ctx, with_exact):
    """Long-time donor population per temperature."""

    def body():
        cfg = _load(ctx)
        temps = _temperatures(cfg)
        specs = _rate_specs(cfg)

        def point(t_kelvin):
            bath_ = replace(cfg.bath, temperature=t_kelvin)
            g = _evaluator(cfg, bath_)
            row = [equilibrium_population(o, cfg.system, g, specs[o])
                   for o in (2, 4, 6)]
            if with_exact:
                row.append(heom_equilibrium(cfg.system, bath_, cfg.heom))
            return row

        from .figures import _run_points
        results, failures = _run_points(temps, point, ctx.obj["threads"])
        if failures:
            t_kelvin, err = next(iter(failures.items()))
            raise type(err)(f"equilibrium sweep failed at T={t_kelvin}: "
                            f"{err}") from err
        columns = ["T_K", "p_eq_fgr", "p_eq_resum4", "p_eq_resum6"]
        if with_exact:
            columns.append("p_eq_exact")
        rows = [(t,) + tuple(results[t]) for t in temps]
        params = _system_params(cfg)
        del params["temperature_K"]
        path = write_csv(os.path.join(cfg.output_dir, "equilibrium.csv"),
                         columns, rows, params)
        click.echo(path)

    _guard(ctx, body)


@main.command()
@click.option("--kind", type=click.Choice(["trajectory", "equilibrium"]),
              default="trajectory", show_default=True)
@click.pass_context
def exact(ctx, kind):
    """Hierarchy reference data only, tagged with its provenance."""

    def body():
        cfg = _load(ctx)
        if kind == "trajectory":
            t_grid = _time_grid(cfg)
            traj = heom_propagate(cfg.system, cfg.bath,
                                  replace(cfg.heom,
                                          t_final=float(t_grid[-1])))
            p = np.interp(t_grid, traj.times, traj.p_donor)
            rows = [(t, v, "exact") for t, v in zip(t_grid, p)]
            path = write_csv(os.path.join(cfg.output_dir, "exact.csv"),
                             ("t_fs", "p1", "provenance"), rows,
                             _system_params(cfg))
        else:
            temps = _temperatures(cfg)
            rows = [(t, heom_equilibrium(cfg.system,
                                         replace(cfg.bath, temperature=t),
                                         cfg.heom), "exact")
                    for t in temps]
            params = _system_params(cfg)
            del params["temperature_K"]
            path = write_csv(os.path.join(cfg.output_dir, "exact.csv"),
                             ("T_K", "p_eq", "provenance"), rows, params)
        click.echo(path)

    _guard(ctx, body)


@main.command()
@click.option("--id", "fig_id", required=True,
              type=click.Choice(list(FIGURE_IDS)))
@click.option("--no-render", is_flag=True,
              help="Skip the PNG, write only the delimited data.")
@click.pass_context
def figure(ctx, fig_id, no_render):
    """Reproduce one figure: CSV sweep data plus a rendered PNG."""

    def body():
        cfg = _load(ctx)
        for path in run_figure(fig_id, cfg, threads=ctx.obj["threads"],
                               render=not no_render):
            click.echo(path)

    _guard(ctx, body)


@main.command()
@click.pass_context
def validate(ctx):
    """Check the configuration file and report every problem found."""
    problems = validate_report(ctx.obj["config_path"])
    for line in problems:
        click.echo(line)
    if problems:
        ctx.exit(2)
    click.echo("configuration ok")


if __name__ == "__main__":
    main(prog_name="kinres")
