"""Closed-form rate kernels against a brute-force discrete-mode oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinres.bath import DebyeBath, LineshapeEvaluator
from kinres.errors import ValidationError
from kinres.kernels import Direction, SystemSpec, k2, k4, k6, kernel_matrix
from kinres.units import cm1_to_radfs

from oracles import (DiscreteLineshape, anticorrelated_bath_model,
                     independent_baths_model)

BETA_300K = 25.46


@pytest.fixture(scope="module")
def discrete_s2():
    model = independent_baths_model(cm1_to_radfs(100.0), cm1_to_radfs(1.0),
                                    0.15, 0.4, BETA_300K, n_fock=12)
    return model, DiscreteLineshape(model), SystemSpec(100.0, 1.0, s_corr=2)


@pytest.fixture(scope="module")
def discrete_s4():
    model = anticorrelated_bath_model(cm1_to_radfs(100.0), cm1_to_radfs(1.0),
                                      0.15, 0.4, BETA_300K, n_fock=20)
    return model, DiscreteLineshape(model), SystemSpec(100.0, 1.0, s_corr=4)


@pytest.fixture(scope="module")
def debye_g():
    return LineshapeEvaluator(DebyeBath(100.0, 0.01, 300.0)) \
        .fast_evaluator(8000.0)


def _both(fixture):
    model, g, system = fixture
    return model, g, system


@pytest.mark.parametrize("fixture_name", ["discrete_s2", "discrete_s4"])
def test_k2_matches_operator_expansion(fixture_name, request):
    model, g, system = _both(request.getfixturevalue(fixture_name))
    for tau in (10.0, 35.0):
        ref = model.k2_matrix(tau)
        assert k2(tau, Direction.FORWARD, system, g) == \
            pytest.approx(-ref[1, 0], rel=1e-8)
        assert k2(tau, Direction.BACKWARD, system, g) == \
            pytest.approx(-ref[0, 1], rel=1e-8)
        # columns of the kernel matrix conserve population
        assert abs(ref[:, 0].sum()) < 1e-12 * abs(ref[1, 0])


@pytest.mark.parametrize("fixture_name", ["discrete_s2", "discrete_s4"])
def test_k4_matches_operator_expansion(fixture_name, request):
    model, g, system = _both(request.getfixturevalue(fixture_name))
    for taus in ((12.0, 20.0, 9.0), (30.0, 5.0, 18.0)):
        ref = model.k4_matrix(*taus)
        assert k4(*taus, Direction.FORWARD, system, g) == \
            pytest.approx(-ref[1, 0], rel=1e-7)
        assert k4(*taus, Direction.BACKWARD, system, g) == \
            pytest.approx(-ref[0, 1], rel=1e-7)


@pytest.mark.parametrize("fixture_name,tol",
                         [("discrete_s2", 1e-5), ("discrete_s4", 1e-4)])
def test_k6_matches_operator_expansion(fixture_name, tol, request):
    model, g, system = _both(request.getfixturevalue(fixture_name))
    taus = (11.0, 7.0, 16.0, 9.0, 13.0)
    ref = model.k6_matrix(*taus)
    assert k6(*taus, Direction.FORWARD, system, g) == \
        pytest.approx(-ref[1, 0], rel=tol)


def test_k4_last_interval_slice_vanishes(discrete_s2, debye_g):
    _model, gd, system = discrete_s2
    assert abs(k4(17.0, 23.0, 0.0, Direction.FORWARD, system, gd)) < 1e-30
    sysb = SystemSpec(100.0, 20.0)
    assert abs(k4(40.0, 60.0, 0.0, Direction.FORWARD, sysb, debye_g)) < 1e-14
    assert abs(k6(11.0, 7.0, 16.0, 9.0, 0.0, Direction.FORWARD, sysb,
                  debye_g)) < 1e-14


def test_k4_first_interval_slice_is_genuinely_nonzero(discrete_s2):
    # the flux with a vanishing first interval does not vanish; the oracle
    # and the closed form agree on its (small) value
    model, g, system = discrete_s2
    ref = -model.k4_matrix(0.0, 23.0, 17.0)[1, 0]
    ours = k4(0.0, 23.0, 17.0, Direction.FORWARD, system, g)
    assert abs(ref) > 1e-18
    assert ours == pytest.approx(ref, rel=1e-5)


def test_frozen_debye_values(debye_g):
    system = SystemSpec(100.0, 20.0)
    assert k2(80.0, Direction.FORWARD, system, debye_g) == \
        pytest.approx(1.4949182046778714e-08, rel=1e-10)
    assert k4(50.0, 80.0, 50.0, Direction.FORWARD, system, debye_g) == \
        pytest.approx(-3.732299580849831e-12, rel=1e-10)
    assert k6(50.0, 80.0, 50.0, 80.0, 50.0, Direction.FORWARD, system,
              debye_g) == pytest.approx(2.70077280255746e-17, rel=1e-10)


def test_directions_coincide_bitwise_without_bias(debye_g):
    system = SystemSpec(0.0, 20.0)
    assert k2(77.0, Direction.FORWARD, system, debye_g) == \
        k2(77.0, Direction.BACKWARD, system, debye_g)
    assert k4(31.0, 54.0, 12.0, Direction.FORWARD, system, debye_g) == \
        k4(31.0, 54.0, 12.0, Direction.BACKWARD, system, debye_g)
    assert k6(21.0, 34.0, 8.0, 55.0, 13.0, Direction.FORWARD, system,
              debye_g) == \
        k6(21.0, 34.0, 8.0, 55.0, 13.0, Direction.BACKWARD, system, debye_g)


def test_higher_orders_vanish_with_coupling_strength():
    g = LineshapeEvaluator(DebyeBath(1e-6, 0.01, 300.0)) \
        .fast_evaluator(8000.0)
    system = SystemSpec(100.0, 20.0)
    scale = abs(k2(80.0, Direction.FORWARD, system, g))
    assert abs(k4(50.0, 80.0, 50.0, Direction.FORWARD, system, g)) \
        < 1e-10 * scale
    assert abs(k6(50.0, 80.0, 50.0, 80.0, 50.0, Direction.FORWARD, system,
                  g)) < 1e-10 * scale


def test_shared_bath_equals_doubled_independent_bath():
    # s_corr enters only through s * g and g is linear in lambda, so
    # (s = 4, lambda) and (s = 2, 2 lambda) must agree identically
    g1 = LineshapeEvaluator(DebyeBath(50.0, 0.01, 300.0)) \
        .fast_evaluator(8000.0)
    g2 = LineshapeEvaluator(DebyeBath(100.0, 0.01, 300.0)) \
        .fast_evaluator(8000.0)
    a = k4(50.0, 80.0, 50.0, Direction.FORWARD,
           SystemSpec(100.0, 20.0, s_corr=4), g1)
    b = k4(50.0, 80.0, 50.0, Direction.FORWARD,
           SystemSpec(100.0, 20.0, s_corr=2), g2)
    assert a == pytest.approx(b, rel=1e-12)


def test_markovian_factorization_kills_k4(debye_g):
    # a long middle interval decorrelates the two interaction pairs
    system = SystemSpec(100.0, 20.0)
    scale = abs(k2(40.0, Direction.FORWARD, system, debye_g)
                * k2(60.0, Direction.FORWARD, system, debye_g))
    assert abs(k4(40.0, 2000.0, 60.0, Direction.FORWARD, system, debye_g)) \
        < 1e-8 * scale


def test_kernel_matrix_structure(debye_g):
    system = SystemSpec(100.0, 20.0)
    m = kernel_matrix(2, (80.0,), system, debye_g)
    assert m.shape == (2, 2)
    assert np.allclose(m.sum(axis=0), 0.0, atol=1e-18)
    assert m[0, 0] == k2(80.0, Direction.FORWARD, system, debye_g)
    assert m[1, 1] == k2(80.0, Direction.BACKWARD, system, debye_g)
    # batched evaluation agrees with the scalar path
    mb = kernel_matrix(2, (np.array([80.0, 120.0]),), system, debye_g)
    assert mb.shape == (2, 2, 2)
    assert mb[0, 0, 0] == m[0, 0]


def test_time_validation(debye_g):
    system = SystemSpec(100.0, 20.0)
    with pytest.raises(ValidationError):
        k2(-1.0, Direction.FORWARD, system, debye_g)
    with pytest.raises(ValidationError):
        k4(10.0, float("nan"), 5.0, Direction.FORWARD, system, debye_g)


def test_system_spec_validation():
    with pytest.raises(ValidationError):
        SystemSpec(0.0, 20.0, s_corr=3)
    with pytest.raises(ValidationError):
        SystemSpec(0.0, -1.0)


@settings(deadline=None, max_examples=20)
@given(tau=st.floats(0.5, 300.0), eps=st.floats(-300.0, 300.0),
       lam=st.floats(0.5, 300.0))
def test_k2_magnitude_bounded_by_bare_rabi(tau, eps, lam):
    # |k2| = 2 J^2 |Re e^{i eps t - s g}| <= 2 J^2 since Re g >= 0
    g = LineshapeEvaluator(DebyeBath(lam, 0.01, 300.0))
    system = SystemSpec(eps, 20.0)
    bound = 2.0 * system.j_radfs ** 2
    assert abs(k2(tau, Direction.FORWARD, system, g)) <= bound * (1 + 1e-12)
