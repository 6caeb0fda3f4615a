"""Population transfer-rate kernels of the two-site model at orders 2, 4, 6.

The donor-acceptor system is two sites with an energy gap eps12 = eps1 -
eps2, electronic coupling J, and identical local Debye baths. The kernels
are the memory functions of the population-only master equation

    dP/dt = - int_0^t K(t - t') P(t') dt',

expanded in even powers of J. Site baths enter only through the lineshape
g(t) and the correlation prefactor s_corr (2 for independent site baths,
4 for a shared anticorrelated bath).

All public evaluators return the positive-transfer flux element, i.e.
k = -K_21 for Forward (acceptor <- donor) and -K_12 for Backward, as a
function of the interval lengths tau_i >= 0 between interactions (the last
interval is tau_2, counting backwards from the observation time; argument
order here is earliest interval first). Both directions share one code
path in which the direction only flips the sign of the gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ValidationError
from .units import cm1_to_radfs

__all__ = ["Direction", "SystemSpec", "KernelSample", "k2", "k4", "k6",
           "kernel_matrix", "signed_gap"]


class Direction(Enum):
    FORWARD = "forward"    # acceptor <- donor (site 2 <- site 1)
    BACKWARD = "backward"  # donor <- acceptor


@dataclass(frozen=True)
class SystemSpec:
    """Two-site system parameters.

    Parameters
    ----------
    eps12 : float
        Site energy gap eps1 - eps2 in cm^-1 (positive means downhill
        forward transfer).
    j_coupling : float
        Electronic coupling J in cm^-1, >= 0.
    s_corr : int
        Bath correlation prefactor: 2 for statistically independent site
        baths, 4 for one shared, anticorrelated bath.
    """

    eps12: float
    j_coupling: float
    s_corr: int = 2

    def __post_init__(self):
        if not (self.j_coupling >= 0.0):
            raise ValidationError(
                f"j_coupling must be >= 0, got {self.j_coupling}")
        if self.s_corr not in (2, 4):
            raise ValidationError(f"s_corr must be 2 or 4, got {self.s_corr}")

    @property
    def eps12_radfs(self) -> float:
        return cm1_to_radfs(self.eps12)

    @property
    def j_radfs(self) -> float:
        return cm1_to_radfs(self.j_coupling)


@dataclass(frozen=True)
class KernelSample:
    """One kernel evaluation: value of the given order at a time tuple."""

    order: int
    direction: Direction
    times: tuple[float, ...]
    value: float


def signed_gap(system: SystemSpec, direction: Direction) -> float:
    """Gap in rad/fs with the sign the requested flux element sees."""
    if direction is Direction.FORWARD:
        return system.eps12_radfs
    return -system.eps12_radfs


def _expm1c(z: np.ndarray) -> np.ndarray:
    """exp(z) - 1 for complex arrays, accurate near z = 0."""
    z = np.asarray(z)
    small = np.abs(z) < 1e-3
    zs = np.where(small, z, 0.0)
    series = zs * (1.0 + zs * (0.5 + zs * (1.0 / 6.0 + zs / 24.0)))
    return np.where(small, series, np.exp(z) - 1.0)


def _term(phase_minus_G: np.ndarray, extra: np.ndarray) -> np.ndarray:
    """exp(p)(exp(e) - 1) computed stably.

    For small e the product form with a series expm1 keeps relative
    accuracy; for large |Re e| the difference of the two full exponentials
    avoids overflow (the combined exponents are bounded for physical
    lineshapes, the split factors need not be).
    """
    small = np.abs(extra) < 1.0
    safe_extra = np.where(small, extra, 0.0)
    prod = np.exp(phase_minus_G) * _expm1c(safe_extra)
    diff = np.exp(phase_minus_G + extra) - np.exp(phase_minus_G)
    return np.where(small, prod, diff)


def _flux2(tau2, eps: float, s: int, j_r: float, g) -> np.ndarray:
    gv = g.values(tau2)
    return 2.0 * j_r ** 2 * np.exp(1j * eps * np.asarray(tau2) - s * gv).real


def _flux4(tau2, tau3, tau4, eps: float, s: int, j_r: float, g) -> np.ndarray:
    tau2 = np.asarray(tau2, dtype=float)
    tau3 = np.asarray(tau3, dtype=float)
    tau4 = np.asarray(tau4, dtype=float)
    g2 = g.values(tau2)
    g3 = g.values(tau3)
    g4 = g.values(tau4)
    g23 = g.values(tau2 + tau3)
    g34 = g.values(tau3 + tau4)
    g234 = g.values(tau2 + tau3 + tau4)
    big_gp = g2 + g4            # G(+tau4)
    big_gm = g2 + np.conj(g4)   # G(-tau4)
    f_p = g3 - g23 - g34 + g234
    f_m = np.conj(g3) - g23 - np.conj(g34) + g234
    ph_m = 1j * eps * (tau2 - tau4)
    ph_p = 1j * eps * (tau2 + tau4)
    total = (_term(ph_m - s * big_gp, s * f_m)
             + _term(ph_m - s * big_gm, s * f_p)
             + _term(ph_p - s * big_gp, -s * f_p)
             + _term(ph_p - s * big_gm, -s * f_m))
    return -2.0 * j_r ** 4 * total.real


# Sixth-order irreducible part: 16 terms, each built from a phase/decay pair
# and one of four F functions. F rows are (key, sign, carries_l, negate)
# where negate is +1, -1, or "r" (argument sign follows the r label), and
# carries_l multiplies the row sign by the l label.
_F6_ROWS = {
    "A": [("t3", +1, False, +1), ("t5", +1, True, "r"), ("t23", -1, False, +1),
          ("t34", -1, False, +1), ("t45", -1, True, +1), ("t56", -1, True, "r"),
          ("t234", +1, False, +1), ("t345", +1, True, +1), ("t456", +1, True, +1),
          ("t2345", -1, True, +1), ("t3456", -1, True, +1), ("t23456", +1, True, +1)],
    "B": [("t3", +1, False, -1), ("t5", +1, True, "r"), ("t23", -1, False, +1),
          ("t34", -1, False, -1), ("t45", -1, True, -1), ("t56", -1, True, "r"),
          ("t234", +1, False, +1), ("t345", +1, True, -1), ("t456", +1, True, -1),
          ("t2345", -1, True, +1), ("t3456", -1, True, -1), ("t23456", +1, True, +1)],
    "C": [("t3", -1, False, +1), ("t5", -1, True, "r"), ("t23", +1, False, +1),
          ("t34", +1, False, +1), ("t45", +1, True, -1), ("t56", +1, True, "r"),
          ("t234", -1, False, +1), ("t345", +1, True, +1), ("t456", -1, True, -1),
          ("t2345", -1, True, +1), ("t3456", -1, True, +1), ("t23456", +1, True, +1)],
    "D": [("t3", -1, False, -1), ("t5", -1, True, "r"), ("t23", +1, False, +1),
          ("t34", +1, False, -1), ("t45", +1, True, +1), ("t56", +1, True, "r"),
          ("t234", -1, False, +1), ("t345", +1, True, -1), ("t456", -1, True, +1),
          ("t2345", -1, True, +1), ("t3456", -1, True, -1), ("t23456", +1, True, +1)],
}

# (a, b, c, d, family, l, r): phase uses tau2 + a*tau4 + b*tau6, decay uses
# g(tau2) + g(c*tau4) + g(d*tau6), and the F factor is family^{l;r}.
_Y_TERMS = [
    (+1, +1, +1, +1, "A", +1, +1),
    (-1, +1, +1, +1, "D", +1, -1),
    (+1, -1, +1, +1, "A", -1, -1),
    (-1, -1, +1, +1, "D", -1, +1),
    (+1, -1, -1, -1, "B", -1, +1),
    (-1, -1, -1, -1, "C", -1, -1),
    (+1, +1, -1, -1, "B", +1, -1),
    (-1, +1, -1, -1, "C", +1, +1),
    (+1, -1, +1, -1, "A", -1, +1),
    (-1, -1, +1, -1, "D", -1, -1),
    (+1, +1, +1, -1, "A", +1, -1),
    (-1, +1, +1, -1, "D", +1, +1),
    (+1, +1, -1, +1, "B", +1, +1),
    (-1, +1, -1, +1, "C", +1, -1),
    (+1, -1, -1, +1, "B", -1, -1),
    (-1, -1, -1, +1, "C", -1, +1),
]


def _f6(gtab: dict, family: str, l: int, r: int) -> np.ndarray:
    """Unit-coefficient F combination; the caller scales by s_corr."""
    total = 0.0
    for key, sign, carries_l, neg in _F6_ROWS[family]:
        coef = sign * (l if carries_l else 1)
        arg_sign = r if neg == "r" else neg
        val = gtab[key] if arg_sign > 0 else np.conj(gtab[key])
        total = total + coef * val
    return total


def _y21_flux(tau2, tau3, tau4, tau5, tau6, eps, s, j_r, g) -> np.ndarray:
    """-Y_21: flux sign convention of the irreducible sixth-order part."""
    t2, t3, t4, t5, t6 = (np.asarray(t, dtype=float)
                          for t in (tau2, tau3, tau4, tau5, tau6))
    gtab = {
        "t3": g.values(t3), "t5": g.values(t5),
        "t23": g.values(t2 + t3), "t34": g.values(t3 + t4),
        "t45": g.values(t4 + t5), "t56": g.values(t5 + t6),
        "t234": g.values(t2 + t3 + t4), "t345": g.values(t3 + t4 + t5),
        "t456": g.values(t4 + t5 + t6), "t2345": g.values(t2 + t3 + t4 + t5),
        "t3456": g.values(t3 + t4 + t5 + t6),
        "t23456": g.values(t2 + t3 + t4 + t5 + t6),
    }
    g2 = g.values(t2)
    g4 = g.values(t4)
    g6 = g.values(t6)
    gconj = {+1: {"4": g4, "6": g6}, -1: {"4": np.conj(g4), "6": np.conj(g6)}}
    # F factors repeat across terms; build each (family, l, r) once.
    f_cache: dict[tuple, np.ndarray] = {}
    total = 0.0
    for a, b, c, d, fam, l, r in _Y_TERMS:
        phase = 1j * eps * (t2 + a * t4 + b * t6)
        decay = g2 + gconj[c]["4"] + gconj[d]["6"]
        key = (fam, l, r)
        if key not in f_cache:
            f_cache[key] = _f6(gtab, fam, l, r)
        total = total + _term(phase - s * decay, -s * f_cache[key])
    # Y21 = -2 J^6 Re{...}; the flux carries one more minus.
    return 2.0 * j_r ** 6 * total.real


def _flux6(tau2, tau3, tau4, tau5, tau6, eps, s, j_r, g) -> np.ndarray:
    """Sixth-order flux: irreducible part plus reducible kernel products."""
    y = _y21_flux(tau2, tau3, tau4, tau5, tau6, eps, s, j_r, g)
    # Reducible parts: matrix products of lower kernels, written out for the
    # 2x2 conservation form (columns sum to zero). The sums over both signed
    # gaps are direction-symmetric.
    f4_early = _flux4(tau2, tau3, tau4, eps, s, j_r, g)
    s2_late = (_flux2(tau6, eps, s, j_r, g) + _flux2(tau6, -eps, s, j_r, g))
    f2_early = _flux2(tau2, eps, s, j_r, g)
    s4_late = (_flux4(tau4, tau5, tau6, eps, s, j_r, g)
               + _flux4(tau4, tau5, tau6, -eps, s, j_r, g))
    return y + f4_early * s2_late + f2_early * s4_late


def _check_times(times) -> tuple[float, ...]:
    out = []
    for t in times:
        t = float(t)
        if not math.isfinite(t) or t < 0.0:
            raise ValidationError(f"kernel times must be finite and >= 0, got {t}")
        out.append(t)
    return tuple(out)


def k2(tau2: float, direction: Direction, system: SystemSpec, g) -> float:
    """Second-order flux kernel -K_21 (Forward) or -K_12 (Backward)."""
    (tau2,) = _check_times([tau2])
    eps = signed_gap(system, direction)
    return float(_flux2(np.array([tau2]), eps, system.s_corr, system.j_radfs, g)[0])


def k4(tau2: float, tau3: float, tau4: float, direction: Direction,
       system: SystemSpec, g) -> float:
    """Fourth-order flux kernel at interval lengths (tau2, tau3, tau4).

    tau2 is the earliest interval (adjacent to the initial preparation),
    tau4 the latest.
    """
    tau2, tau3, tau4 = _check_times([tau2, tau3, tau4])
    eps = signed_gap(system, direction)
    return float(_flux4(np.array([tau2]), np.array([tau3]), np.array([tau4]),
                        eps, system.s_corr, system.j_radfs, g)[0])


def k6(tau2: float, tau3: float, tau4: float, tau5: float, tau6: float,
       direction: Direction, system: SystemSpec, g) -> float:
    """Sixth-order flux kernel at interval lengths (tau2, ..., tau6)."""
    times = _check_times([tau2, tau3, tau4, tau5, tau6])
    eps = signed_gap(system, direction)
    arrays = [np.array([t]) for t in times]
    return float(_flux6(*arrays, eps, system.s_corr, system.j_radfs, g)[0])


def kernel_matrix(order: int, times, system: SystemSpec, g) -> np.ndarray:
    """Full 2x2 kernel matrix at a time tuple.

    Built from the two flux elements with the conservation completion
    K_11 = -K_21, K_22 = -K_12, so columns sum to zero exactly. Each slot
    of `times` may be a scalar (returns shape (2, 2)) or an array of equal
    length across slots (returns shape (2, 2, n)).
    """
    n_expected = {2: 1, 4: 3, 6: 5}
    if order not in n_expected:
        raise ValidationError(f"order must be 2, 4, or 6, got {order}")
    if len(times) != n_expected[order]:
        raise ValidationError(
            f"order {order} needs {n_expected[order]} times, got {len(times)}")
    scalar = all(np.ndim(t) == 0 for t in times)
    arrays = []
    for t in times:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if not np.all(np.isfinite(t)) or np.any(t < 0.0):
            raise ValidationError("kernel times must be finite and >= 0")
        arrays.append(t)
    if len({len(t) for t in arrays}) != 1:
        raise ValidationError("time arrays must have equal length")
    flux = {2: _flux2, 4: _flux4, 6: _flux6}[order]
    fwd = flux(*arrays, signed_gap(system, Direction.FORWARD),
               system.s_corr, system.j_radfs, g)
    bwd = flux(*arrays, signed_gap(system, Direction.BACKWARD),
               system.s_corr, system.j_radfs, g)
    out = np.array([[fwd, -bwd], [-fwd, bwd]])
    return out[:, :, 0] if scalar else out
