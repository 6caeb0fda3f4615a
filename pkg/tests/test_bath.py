"""Lineshape function and Debye-bath mode machinery."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinres.bath import (DebyeBath, LineshapeEvaluator, LineshapeMode,
                         correlation_modes, default_n_matsubara,
                         lineshape_by_quadrature)
from kinres.errors import ValidationError


def test_constructor_rejects_bad_parameters():
    with pytest.raises(ValidationError):
        DebyeBath(-1.0, 0.01, 300.0)
    with pytest.raises(ValidationError):
        DebyeBath(100.0, 0.0, 300.0)
    with pytest.raises(ValidationError):
        DebyeBath(100.0, 0.01, -5.0)
    with pytest.raises(ValidationError):
        DebyeBath(100.0, 0.01, 300.0, n_matsubara=-1)


def test_from_inverse_time_matches_direct():
    a = DebyeBath.from_inverse_time(100.0, 100.0, 300.0)
    b = DebyeBath(100.0, 0.01, 300.0)
    assert a == b


def test_with_reorganization_rescales_only_lambda():
    bath = DebyeBath(100.0, 0.01, 250.0)
    scaled = bath.with_reorganization(37.0)
    assert scaled.reorganization == 37.0
    assert scaled.omega_d == bath.omega_d
    assert scaled.temperature == bath.temperature


def test_lineshape_onset():
    bath = DebyeBath(100.0, 0.01, 300.0)
    for mode in LineshapeMode:
        g = LineshapeEvaluator(bath, mode)
        vals = g.values(np.array([0.0, 1e-4]))
        assert vals[0] == 0.0
        # the imaginary part opens linearly with the reorganization slope
        # (displacement-correlation convention); the real part is smaller
        assert vals[1].imag / 1e-4 == pytest.approx(bath.lambda_radfs,
                                                    rel=1e-5)
        assert abs(vals[1].real) < abs(vals[1].imag)


def test_full_matsubara_matches_direct_quadrature():
    bath = DebyeBath(100.0, 0.01, 300.0)
    g = LineshapeEvaluator(bath, LineshapeMode.FULL_MATSUBARA)
    t = np.array([10.0, 100.0, 500.0, 2000.0])
    ours = g.values(t)
    ref = np.array([lineshape_by_quadrature(bath, ti) for ti in t])
    assert np.max(np.abs(ours - ref) / np.abs(ref)) < 1e-6


def test_high_temperature_close_to_full_at_room_temperature():
    bath = DebyeBath(100.0, 0.01, 300.0)
    t = np.linspace(1.0, 2000.0, 200)
    full = LineshapeEvaluator(bath, LineshapeMode.FULL_MATSUBARA).values(t)
    ht = LineshapeEvaluator(bath, LineshapeMode.HIGH_TEMPERATURE).values(t)
    # relative to the lineshape scale the two modes track to a few 1e-4;
    # pointwise they agree within 2% once the Matsubara transient
    # (decay time beta/2pi ~ 4 fs) has died out
    assert np.max(np.abs(ht - full)) / np.max(np.abs(full)) < 2e-3
    late = t >= 50.0
    rel = np.abs(ht[late] - full[late]) / np.abs(full[late])
    assert np.max(rel) < 0.02


def test_frozen_value_at_250fs():
    g = LineshapeEvaluator(DebyeBath(100.0, 0.01, 300.0),
                           LineshapeMode.FULL_MATSUBARA)
    val = complex(g.values(np.array([250.0]))[0])
    assert val == pytest.approx(23.480397601969198 + 1.7290320309984009j,
                                rel=1e-12)


def test_imaginary_part_saturates_at_lambda_over_omega_d():
    bath = DebyeBath(100.0, 0.01, 300.0)
    g = LineshapeEvaluator(bath, LineshapeMode.FULL_MATSUBARA)
    tail = g.values(np.array([1e6]))[0].imag
    assert tail == pytest.approx(bath.lambda_radfs / bath.omega_d, rel=1e-12)


@settings(deadline=None, max_examples=25)
@given(lam=st.floats(0.5, 500.0), t_kelvin=st.floats(100.0, 400.0),
       omega_inv=st.floats(20.0, 500.0))
def test_real_part_monotone_high_temperature(lam, t_kelvin, omega_inv):
    bath = DebyeBath.from_inverse_time(lam, omega_inv, t_kelvin)
    g = LineshapeEvaluator(bath, LineshapeMode.HIGH_TEMPERATURE)
    t = np.linspace(0.0, 10.0 * omega_inv, 300)
    re = g.values(t).real
    assert np.all(np.diff(re) >= -1e-12)


def test_fast_evaluator_tracks_exact_values():
    bath = DebyeBath(100.0, 0.01, 300.0, n_matsubara=6)
    g = LineshapeEvaluator(bath, LineshapeMode.FULL_MATSUBARA)
    fast = g.fast_evaluator(3000.0)
    t = np.linspace(0.0, 2999.0, 700)
    assert np.max(np.abs(fast.values(t) - g.values(t))) < 1e-8
    # beyond the window both parts continue linearly, the exact asymptote
    t_out = np.array([4000.0, 6000.0])
    rel = np.abs(fast.values(t_out) - g.values(t_out)) \
        / np.abs(g.values(t_out))
    assert np.max(rel) < 1e-6


def test_default_matsubara_count_is_temperature_aware():
    assert default_n_matsubara(DebyeBath(100.0, 0.01, 300.0)) == 6
    cold = default_n_matsubara(DebyeBath(100.0, 0.01, 100.0))
    assert cold >= default_n_matsubara(DebyeBath(100.0, 0.01, 300.0))


def test_correlation_modes_shapes_and_drude_limit():
    bath = DebyeBath(100.0, 0.01, 300.0)
    coeffs, rates, remainder = correlation_modes(bath, 4)
    assert len(coeffs) == len(rates) == 5
    assert rates[0] == pytest.approx(bath.omega_d)
    # Drude coefficient: lambda omega_d (cot(beta omega_d / 2) - i)
    beta = bath.beta_fs
    expect = bath.lambda_radfs * bath.omega_d \
        * (1.0 / np.tan(0.5 * beta * bath.omega_d) - 1j)
    assert coeffs[0] == pytest.approx(expect, rel=1e-12)
    # Matsubara terms are real and decay with index
    assert np.all(np.isreal(coeffs[1:]))
    assert np.all(np.diff(np.abs(coeffs[1:])) < 0.0)
    assert np.isreal(remainder)
