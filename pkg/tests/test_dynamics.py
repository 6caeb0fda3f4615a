"""Inverse-Laplace population dynamics against closed forms and a
time-domain Volterra march."""

import math

import numpy as np
import pytest

from kinres.bath import DebyeBath, LineshapeEvaluator, LineshapeMode
from kinres.dynamics import (InversionSpec, PopulationTrajectory, Provenance,
                             equilibrium_population, invert_laplace,
                             population_trajectory, solve_volterra_order2)
from kinres.errors import ValidationError
from kinres.kernels import SystemSpec
from kinres.quadrature import QuadSpec
from kinres.units import cm1_to_radfs, thermal_beta_fs

SYS_BIASED = SystemSpec(100.0, 20.0)
SYS_UNBIASED = SystemSpec(0.0, 20.0)


@pytest.fixture(scope="module")
def weak_g():
    return LineshapeEvaluator(DebyeBath(4.0, 0.01, 300.0)) \
        .fast_evaluator(8000.0)


def test_invert_laplace_closed_forms():
    a, b = 0.004, 0.02
    t = np.arange(0.0, 1500.1, 15.0)
    decay = invert_laplace(lambda z: 1.0 / (z + a), t)
    assert np.max(np.abs(decay - np.exp(-a * t))) < 1e-9
    ringing = invert_laplace(lambda z: (z + a) / ((z + a) ** 2 + b ** 2), t)
    assert np.max(np.abs(ringing - np.exp(-a * t) * np.cos(b * t))) < 1e-7


def test_invert_laplace_serves_t_zero_by_initial_value():
    out = invert_laplace(lambda z: 1.0 / (z + 0.01), np.array([0.0, 50.0]))
    assert out[0] == pytest.approx(1.0, abs=1e-8)


def test_inversion_spec_validation():
    with pytest.raises(ValidationError):
        InversionSpec(sigma=0.0)
    with pytest.raises(ValidationError):
        InversionSpec(n_terms=4)
    with pytest.raises(ValidationError):
        InversionSpec(t_scale=-1.0)
    with pytest.raises(ValidationError):
        invert_laplace(lambda z: 1.0 / z, np.array([-1.0, 2.0]))
    with pytest.raises(ValidationError):
        # periodization window must contain the largest requested time
        invert_laplace(lambda z: 1.0 / z, np.array([10.0]),
                       InversionSpec(t_scale=5.0))


def test_trajectory_matches_volterra_march(weak_g):
    t = np.arange(0.0, 2000.1, 5.0)
    inv = population_trajectory(2, SYS_BIASED, weak_g, QuadSpec(),
                                InversionSpec(), t)
    march = solve_volterra_order2(SYS_BIASED, weak_g, t)
    rms = math.sqrt(float(np.mean((inv.p_donor - march.p_donor) ** 2)))
    assert rms < 1e-4
    assert inv.p_donor[0] == 1.0
    assert march.p_donor[0] == 1.0
    assert inv.provenance is Provenance.ORDER2
    assert inv.max_overshoot < 1e-3


def test_unbiased_trajectory_equilibrates_to_half(weak_g):
    t = np.arange(0.0, 2000.1, 10.0)
    out = population_trajectory(2, SYS_UNBIASED, weak_g, QuadSpec(),
                                InversionSpec(), t)
    assert out.p_donor[-1] == pytest.approx(0.5, abs=1e-3)


def test_volterra_grid_validation(weak_g):
    with pytest.raises(ValidationError):
        solve_volterra_order2(SYS_BIASED, weak_g, np.array([0.0]))
    with pytest.raises(ValidationError):
        solve_volterra_order2(SYS_BIASED, weak_g,
                              np.array([0.0, 5.0, 11.0, 20.0]))
    with pytest.raises(ValidationError):
        # the step cap is 0.1 / omega_d = 10 fs for this bath
        solve_volterra_order2(SYS_BIASED, weak_g,
                              np.arange(0.0, 100.1, 20.0))


def test_equilibrium_population_with_exact_lineshape():
    g_full = LineshapeEvaluator(DebyeBath(4.0, 0.01, 300.0, n_matsubara=6),
                                LineshapeMode.FULL_MATSUBARA) \
        .fast_evaluator(60000.0)
    e2 = equilibrium_population(2, SYS_BIASED, g_full,
                                QuadSpec(n_points=4000, t_max=50000.0))
    e4 = equilibrium_population(4, SYS_BIASED, g_full,
                                QuadSpec(n_points=72, t_max=50000.0))
    shared = equilibrium_population(4, SYS_BIASED, g_full,
                                    QuadSpec(n_points=72, t_max=50000.0),
                                    shared_corrections=True)
    boltzmann = 1.0 / (1.0 + math.exp(thermal_beta_fs(300.0)
                                      * cm1_to_radfs(100.0)))
    # frozen regressions for this weak-coupling, exact-lineshape setup
    assert e2 == pytest.approx(0.3823484016927959, rel=1e-10)
    assert e4 == pytest.approx(0.3826188607030688, rel=1e-10)
    # order-2 detailed balance reproduces Boltzmann when the lineshape
    # satisfies the symmetry exactly; shared corrections preserve it
    assert e2 == pytest.approx(boltzmann, abs=1e-7)
    assert shared == pytest.approx(e2, rel=1e-13)
    assert abs(e4 - boltzmann) > abs(e2 - boltzmann)


def test_equilibrium_unbiased_is_exactly_half(weak_g):
    out = equilibrium_population(2, SYS_UNBIASED, weak_g,
                                 QuadSpec(n_points=2000))
    assert out == 0.5


def test_equilibrium_order_validation(weak_g):
    with pytest.raises(ValidationError):
        equilibrium_population(3, SYS_BIASED, weak_g, QuadSpec())
    with pytest.raises(ValidationError):
        population_trajectory(5, SYS_BIASED, weak_g, QuadSpec(),
                              InversionSpec(), np.arange(0.0, 100.0, 5.0))
    with pytest.raises(ValidationError):
        # mapping input must cover every order it implies
        population_trajectory(4, SYS_BIASED, weak_g, {4: QuadSpec()},
                              InversionSpec(), np.arange(0.0, 100.0, 5.0))


def test_trajectory_shape_guard():
    with pytest.raises(ValidationError):
        PopulationTrajectory(np.arange(3.0), np.ones(4), Provenance.ORDER2)
