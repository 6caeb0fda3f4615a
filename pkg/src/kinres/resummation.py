"""Continued-fraction resummation of the rate-kernel series.

The even-order partial rates k~2, k~4, k~6 at a common Laplace point define
correction coefficients

    delta_2 = -k4/k2,   delta_4 = -delta_2 - k6/k4,

and the resummed rate is the truncated continued fraction

    k_resum = k2 / (1 + delta_2 / (1 + delta_4 / (1 + ...))).

Truncating after delta_2 gives the Pade form k2^2/(k2 - k4); each deeper
truncation matches the power series through the corresponding order, and
adding a level never changes the coefficients below it. Forward and backward
channels are resummed independently and never mix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDenominator, SingularMatrix, ZeroConvergent
from .kernels import Direction

__all__ = ["CfCoefficients", "ResummedRate", "cf_coefficients", "cf_resum",
           "series_consistency", "matrix_pade"]

_ABS_FLOOR = 1e-300
_REL_FLOOR = 1e-12


@dataclass(frozen=True)
class CfCoefficients:
    """Correction coefficients (delta_2, delta_4, ...) at one Laplace point."""

    direction: Direction
    z: complex
    deltas: tuple[complex, ...]

    @property
    def depth(self) -> int:
        return len(self.deltas)


@dataclass(frozen=True)
class ResummedRate:
    order: int
    direction: Direction
    z: complex
    value: complex


def cf_coefficients(k2z: complex, k4z: complex, k6z: complex | None = None,
                    direction: Direction = Direction.FORWARD,
                    z: complex = 0.0) -> CfCoefficients:
    """Match the continued fraction to the given partial rates.

    With k6z omitted only delta_2 is produced (depth 1). Denominators are
    degenerate below an absolute floor of 1e-300, or below 1e-12 relative
    to |k2z| for the delta_4 divisor; degeneracy raises rather than being
    silently regularized.
    """
    k2z = complex(k2z)
    k4z = complex(k4z)
    if abs(k2z) < _ABS_FLOOR:
        raise DegenerateDenominator(
            f"|k2(z)| = {abs(k2z):.3e} too small to define delta_2 at z={z}")
    delta2 = -k4z / k2z
    if k6z is None:
        return CfCoefficients(direction, complex(z), (delta2,))
    if abs(k4z) < max(_ABS_FLOOR, _REL_FLOOR * abs(k2z)):
        raise DegenerateDenominator(
            f"|k4(z)| = {abs(k4z):.3e} too small to define delta_4 at z={z}")
    delta4 = -delta2 - complex(k6z) / k4z
    return CfCoefficients(direction, complex(z), (delta2, delta4))


def cf_resum(coeffs: CfCoefficients, k2z: complex) -> ResummedRate:
    """Evaluate the truncated continued fraction bottom-up.

    A vanishing intermediate convergent is a pole of the approximant and
    raises ZeroConvergent carrying the offending z.
    """
    deltas = coeffs.deltas
    acc = 1.0 + deltas[-1]
    for delta in reversed(deltas[:-1]):
        if abs(acc) < _ABS_FLOOR:
            raise ZeroConvergent("continued fraction hit a pole", z=coeffs.z)
        acc = 1.0 + delta / acc
    if abs(acc) < _ABS_FLOOR:
        raise ZeroConvergent("continued fraction hit a pole", z=coeffs.z)
    order = 2 * (len(deltas) + 1)
    return ResummedRate(order, coeffs.direction, coeffs.z, complex(k2z) / acc)


def _series_of_fraction(k2z: complex, deltas, n_orders: int) -> list[complex]:
    """Taylor coefficients of k2/(1 + d1 x/(1 + d2 x/(...))) in the formal
    order-counting variable x, from the innermost level outward.

    Depth-agnostic on purpose: the matching procedure for hypothetical
    higher-order inputs is this expansion inverted.
    """
    # tail(x) as a truncated power series, innermost level first
    tail = np.zeros(n_orders, dtype=complex)
    tail[0] = 1.0
    for delta in reversed(deltas):
        # new_tail = 1 + delta * x / tail ; invert tail as a power series
        inv = np.zeros(n_orders, dtype=complex)
        inv[0] = 1.0 / tail[0]
        for n in range(1, n_orders):
            inv[n] = -inv[0] * np.dot(tail[1:n + 1], inv[n - 1::-1])
        new = np.zeros(n_orders, dtype=complex)
        new[0] = 1.0
        new[1:] += delta * inv[:-1]
        tail = new
    inv = np.zeros(n_orders, dtype=complex)
    inv[0] = 1.0 / tail[0]
    for n in range(1, n_orders):
        inv[n] = -inv[0] * np.dot(tail[1:n + 1], inv[n - 1::-1])
    return list(k2z * inv)


def series_consistency(coeffs: CfCoefficients, k2z: complex, k4z: complex,
                       k6z: complex | None = None) -> tuple[float, float | None]:
    """Absolute residuals between the fraction's re-expansion and the inputs.

    Re-expands the truncated fraction in the formal order-counting variable
    and returns (|implied k4 - k4z|, |implied k6 - k6z|). For depth-1
    coefficients the implied sixth order is k4z^2/k2z, so the second residual
    measures what the Pade form gets wrong; omit k6z to skip it.
    """
    series = _series_of_fraction(complex(k2z), coeffs.deltas, 3)
    res4 = abs(series[1] - complex(k4z))
    if k6z is None:
        return res4, None
    return res4, abs(series[2] - complex(k6z))


def matrix_pade(k2_matrix: np.ndarray, k4_matrix: np.ndarray) -> np.ndarray:
    """Depth-1 resummation of full 2x2 kernel matrices.

    The kernel matrices here follow the loss convention (positive forward
    flux in the (1,1) slot, columns summing to zero), for which the
    correction term is Xi = K4 pinv(K2); generator-sign matrices would
    carry a minus sign instead. The conservation structure makes K2
    strictly singular, hence the pseudoinverse. Returns (I - Xi)^{-1} K2,
    which provably keeps zero column sums; raises SingularMatrix when
    I - Xi is not invertible.
    """
    k2_matrix = np.asarray(k2_matrix, dtype=complex)
    k4_matrix = np.asarray(k4_matrix, dtype=complex)
    if k2_matrix.shape != (2, 2) or k4_matrix.shape != (2, 2):
        raise ValueError("kernel matrices must be 2x2")
    xi = k4_matrix @ np.linalg.pinv(k2_matrix)
    lhs = np.eye(2) - xi
    spectrum = np.linalg.svd(lhs, compute_uv=False)
    # relative test: rounding in pinv leaves ~1e-16 in place of exact zeros
    if spectrum[-1] < 1e-12 * max(spectrum[0], 1.0):
        raise SingularMatrix("I - Xi is singular")
    return np.linalg.solve(lhs, k2_matrix)
