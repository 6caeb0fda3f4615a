"""Debye bath description and lineshape evaluation.

The bath is an Ohmic-Lorentzian (Debye) spectral density

    J(w) = (2 lambda / pi) * w * w_D / (w^2 + w_D^2),   w > 0,

with reorganization energy lambda (cm^-1 at the interface, angular rad/fs
internally) and cutoff rate w_D (fs^-1). The lineshape function

    g(t) = int_0^inf dw J(w)/w^2 [ (1 - cos(w t)) coth(beta w / 2)
                                   + i sin(w t) ]

is evaluated either in the high-temperature closed form or by Matsubara
expansion. g(-t) = conj(g(t)) and g(0) = 0 hold exactly in both modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import integrate, interpolate, special

from .errors import ValidationError
from .units import cm1_to_radfs, thermal_beta_fs

__all__ = [
    "DebyeBath",
    "LineshapeMode",
    "LineshapeEvaluator",
    "spectral_density",
    "matsubara_frequencies",
    "default_n_matsubara",
    "lineshape_by_quadrature",
    "correlation_modes",
]

# Convergence target used when choosing the Matsubara depth automatically.
_AUTO_MATSUBARA_TOL = 1e-12
_AUTO_MATSUBARA_CAP = 2000


class LineshapeMode(Enum):
    """Which evaluation of g(t) to use."""

    HIGH_TEMPERATURE = "high_temperature"
    FULL_MATSUBARA = "full_matsubara"


@dataclass(frozen=True)
class DebyeBath:
    """Debye bath parameters.

    Parameters
    ----------
    reorganization : float
        Reorganization energy lambda in cm^-1, >= 0.
    omega_d : float
        Cutoff rate w_D in fs^-1 (i.e. the inverse of the bath correlation
        time). Use :meth:`from_inverse_time` to construct from w_D^-1 in fs.
    temperature : float
        Temperature in K, > 0.
    n_matsubara : int or None
        Number of explicit Matsubara modes kept by the full evaluation.
        None selects a depth automatically (see ``default_n_matsubara``).
    """

    reorganization: float
    omega_d: float
    temperature: float
    n_matsubara: int | None = None

    def __post_init__(self):
        if not (self.reorganization >= 0.0):
            raise ValidationError(
                f"reorganization must be >= 0 cm^-1, got {self.reorganization}")
        if not (self.omega_d > 0.0):
            raise ValidationError(f"omega_d must be positive, got {self.omega_d}")
        if not (self.temperature > 0.0):
            raise ValidationError(
                f"temperature must be positive, got {self.temperature}")
        if self.n_matsubara is not None and self.n_matsubara < 0:
            raise ValidationError(
                f"n_matsubara must be >= 0, got {self.n_matsubara}")

    @classmethod
    def from_inverse_time(cls, reorganization: float, omega_d_inv_fs: float,
                          temperature: float,
                          n_matsubara: int | None = None) -> "DebyeBath":
        """Construct from the bath correlation time w_D^-1 in fs."""
        if omega_d_inv_fs <= 0.0:
            raise ValidationError(
                f"omega_d_inv_fs must be positive, got {omega_d_inv_fs}")
        return cls(reorganization, 1.0 / omega_d_inv_fs, temperature, n_matsubara)

    @property
    def lambda_radfs(self) -> float:
        """Reorganization energy as an angular frequency (rad/fs)."""
        return cm1_to_radfs(self.reorganization)

    @property
    def beta_fs(self) -> float:
        """Inverse temperature in fs."""
        return thermal_beta_fs(self.temperature)

    def with_reorganization(self, reorganization: float) -> "DebyeBath":
        return replace(self, reorganization=reorganization)


def spectral_density(omega, bath: DebyeBath):
    """Debye spectral density J(w) in rad/fs; zero for w <= 0.

    Accepts scalars or arrays of angular frequencies in rad/fs.
    """
    omega = np.asarray(omega, dtype=float)
    lam = bath.lambda_radfs
    wd = bath.omega_d
    with np.errstate(invalid="ignore"):
        val = (2.0 * lam / math.pi) * omega * wd / (omega ** 2 + wd ** 2)
    result = np.where(omega > 0.0, val, 0.0)
    return result if result.ndim else float(result)


def matsubara_frequencies(bath: DebyeBath, n: int) -> np.ndarray:
    """First n bosonic Matsubara rates nu_k = 2 pi k / beta, k = 1..n."""
    return 2.0 * math.pi * np.arange(1, n + 1) / bath.beta_fs


def _matsubara_coefficients(bath: DebyeBath, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients c_k of the Re g series, term c_k (e^{-nu_k t} + nu_k t - 1)."""
    nu = matsubara_frequencies(bath, n)
    wd = bath.omega_d
    denom = nu * (nu ** 2 - wd ** 2)
    if np.any(np.abs(nu - wd) < 1e-12 * wd):
        raise ValidationError(
            "a Matsubara rate coincides with omega_d; lineshape series is singular")
    coef = (4.0 * bath.lambda_radfs * wd / bath.beta_fs) / denom
    return nu, coef


def _tail_sums(bath: DebyeBath) -> tuple[float, float]:
    """Closed forms for S1 = sum_k 1/(nu_k^2 - w^2), S0 = sum_k 1/(nu_k (nu_k^2 - w^2))."""
    beta = bath.beta_fs
    wd = bath.omega_d
    x = 0.5 * beta * wd
    a = x / math.pi
    if abs(a - round(a)) < 1e-9 and round(a) >= 1:
        raise ValidationError(
            "beta*omega_d/(2*pi) is integer; Matsubara tail sums are singular")
    s1 = (1.0 - x / math.tan(x)) / (2.0 * wd ** 2)
    psi_sum = special.digamma(1.0 - a) + special.digamma(1.0 + a) + 2.0 * np.euler_gamma
    s0 = (beta / (2.0 * math.pi)) ** 3 * (-psi_sum / (2.0 * a ** 2))
    return s1, float(s0)


def default_n_matsubara(bath: DebyeBath) -> int:
    """Smallest Matsubara depth whose next term no longer moves g(beta/2).

    The k-th explicit term contributes c_k e^{-nu_k beta/2} = c_k e^{-pi k}
    beyond what the analytic tail already accounts for; the depth is the
    smallest k where that increment falls below 1e-12 of |g(beta/2)|.
    """
    if bath.reorganization == 0.0:
        return 0
    beta = bath.beta_fs
    t_ref = 0.5 * beta
    ref = abs(_g_high_temperature(np.array([t_ref]), bath)[0])
    if ref == 0.0:
        return 0
    for k in range(1, _AUTO_MATSUBARA_CAP + 1):
        nu_k = 2.0 * math.pi * k / beta
        wd = bath.omega_d
        c_k = (4.0 * bath.lambda_radfs * wd / beta) / (nu_k * abs(nu_k ** 2 - wd ** 2))
        if c_k * math.exp(-nu_k * t_ref) < _AUTO_MATSUBARA_TOL * ref:
            return k
    raise ValidationError(
        f"Matsubara depth exceeded cap {_AUTO_MATSUBARA_CAP} without converging")


def _g_high_temperature(t: np.ndarray, bath: DebyeBath) -> np.ndarray:
    """High-temperature closed form, valid for k_B T >> w_D."""
    lam = bath.lambda_radfs
    wd = bath.omega_d
    beta = bath.beta_fs
    at = np.abs(t)
    decay = -np.expm1(-wd * at)  # 1 - e^{-w_D |t|}, stable for small t
    re = (2.0 * lam / (beta * wd)) * (at - decay / wd)
    im = np.sign(t) * lam * decay / wd
    return re + 1j * im


class LineshapeEvaluator:
    """Evaluates g(t) for a Debye bath in a chosen mode.

    The full-Matsubara evaluation keeps ``bath.n_matsubara`` explicit
    exponential modes and sums the remaining linear-in-t parts of the series
    analytically (digamma closed forms), so g(0) = 0 holds exactly and the
    truncation error decays like e^{-nu_{K+1} t}.
    """

    def __init__(self, bath: DebyeBath, mode: LineshapeMode = LineshapeMode.HIGH_TEMPERATURE):
        if not isinstance(mode, LineshapeMode):
            raise ValidationError(f"mode must be a LineshapeMode, got {mode!r}")
        self.bath = bath
        self.mode = mode
        if mode is LineshapeMode.FULL_MATSUBARA:
            n = bath.n_matsubara
            if n is None:
                n = default_n_matsubara(bath)
            self.n_matsubara = n
            self._nu, self._coef = _matsubara_coefficients(bath, n)
            s1, s0 = _tail_sums(bath)
            pref = 4.0 * bath.lambda_radfs * bath.omega_d / bath.beta_fs
            s1_tail = s1 - float(np.sum(1.0 / (self._nu ** 2 - bath.omega_d ** 2))) if n else s1
            s0_tail = s0 - float(np.sum(1.0 / (self._nu * (self._nu ** 2 - bath.omega_d ** 2)))) if n else s0
            self._tail_slope = pref * s1_tail
            self._tail_const = pref * s0_tail
            self._nu_next = 2.0 * math.pi * (n + 1) / bath.beta_fs
        else:
            self.n_matsubara = 0

    def _g_positive(self, t: np.ndarray) -> np.ndarray:
        """g(t) for t >= 0."""
        bath = self.bath
        if self.mode is LineshapeMode.HIGH_TEMPERATURE:
            return _g_high_temperature(t, bath)
        lam = bath.lambda_radfs
        wd = bath.omega_d
        x = 0.5 * bath.beta_fs * wd
        decay = -np.expm1(-wd * t)
        # Drude pole term plus explicit Matsubara modes.
        re = (lam / wd) / math.tan(x) * (wd * t - decay)
        if self.n_matsubara:
            ex = np.exp(-np.multiply.outer(t, self._nu))
            re = re + ex @ self._coef + (t[..., None] * self._nu - 1.0) @ self._coef
        # Analytic remainder of the series: linear part summed to infinity,
        # dropped exponentials replaced by their envelope so g(0) stays 0.
        re = re + self._tail_slope * t - self._tail_const \
            + self._tail_const * np.exp(-self._nu_next * t)
        im = lam * decay / wd
        return re + 1j * im

    def values(self, t) -> np.ndarray:
        """Vectorized g(t); negative arguments via g(-t) = conj(g(t))."""
        t = np.asarray(t, dtype=float)
        if not np.all(np.isfinite(t)):
            raise ValidationError("lineshape argument must be finite")
        g = self._g_positive(np.abs(t))
        return np.where(t < 0.0, np.conj(g), g)

    def lineshape(self, t: float) -> complex:
        """g(t) for a scalar time in fs."""
        if not math.isfinite(t):
            raise ValidationError(f"lineshape argument must be finite, got {t}")
        return complex(self.values(np.array([t]))[0])

    __call__ = lineshape

    def fast_evaluator(self, t_max: float, grid_step: float = 0.25):
        """Evaluator for bulk sampling on [-t_max, t_max].

        High-temperature mode is already a cheap closed form and is returned
        as-is; the full mode returns a cubic-spline table of Re g (Im g stays
        closed-form). Build once, then treat as read-only.
        """
        if self.mode is LineshapeMode.HIGH_TEMPERATURE:
            return self
        return _SplineLineshape(self, t_max, grid_step)


class _SplineLineshape:
    """Spline-backed Re g for the full-Matsubara mode; Im g is closed form."""

    def __init__(self, ev: LineshapeEvaluator, t_max: float, grid_step: float):
        n = max(64, int(math.ceil(t_max / grid_step)) + 1)
        grid = np.linspace(0.0, t_max, n)
        g = ev._g_positive(grid)
        self.bath = ev.bath
        self.mode = ev.mode
        self._t_max = t_max
        self._spline = interpolate.CubicSpline(grid, g.real)
        self._edge_value = g.real[-1]
        self._edge_slope = float(self._spline(t_max, 1))

    def values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        at = np.abs(t)
        re = self._spline(np.minimum(at, self._t_max))
        over = at > self._t_max
        if np.any(over):
            # Re g is asymptotically linear; extend with the edge slope.
            re = np.where(over, self._edge_value + self._edge_slope * (at - self._t_max), re)
        bath = self.bath
        im = np.sign(t) * bath.lambda_radfs * (-np.expm1(-bath.omega_d * at)) / bath.omega_d
        return re + 1j * im


def lineshape_by_quadrature(bath: DebyeBath, t: float,
                            rtol: float = 1e-10) -> complex:
    """Reference g(t) by direct adaptive quadrature over frequency.

    Slow but independent of the Matsubara machinery; used to certify the
    series evaluation. The integrand is written with 2 sin^2(w t / 2) for
    the 1 - cos part, which is numerically exact at small arguments, and the
    O(w^-3) tail beyond the truncation frequency is added analytically.
    """
    if not math.isfinite(t):
        raise ValidationError(f"lineshape argument must be finite, got {t}")
    if t < 0.0:
        return complex(np.conj(lineshape_by_quadrature(bath, -t, rtol)))
    if t == 0.0 or bath.reorganization == 0.0:
        return 0.0 + 0.0j
    lam = bath.lambda_radfs
    wd = bath.omega_d
    beta = bath.beta_fs

    def prefactor(w):
        return (2.0 * lam / math.pi) * wd / (w * (w ** 2 + wd ** 2))

    def integrand(w):
        pref = prefactor(w)
        re = pref * 2.0 * np.sin(0.5 * w * t) ** 2 / np.tanh(0.5 * beta * w)
        return re + 1j * (pref * np.sin(w * t))

    w_cut = max(100.0 * wd, 40.0 / beta, 20.0 / t)
    val, _ = integrate.quad(integrand, 0.0, w_cut, complex_func=True,
                            points=[wd], limit=4000, epsabs=1e-14, epsrel=rtol)
    # Beyond w_cut, coth -> 1 (w_cut >> 1/beta); split the tail into its
    # smooth part and oscillatory-weighted pieces handled by QAWF.
    tail_smooth, _ = integrate.quad(prefactor, w_cut, np.inf,
                                    epsabs=1e-15, epsrel=rtol)
    tail_cos, _ = integrate.quad(prefactor, w_cut, np.inf, weight="cos",
                                 wvar=t, epsabs=1e-15, epsrel=rtol)
    tail_sin, _ = integrate.quad(prefactor, w_cut, np.inf, weight="sin",
                                 wvar=t, epsabs=1e-15, epsrel=rtol)
    return complex(val) + (tail_smooth - tail_cos) + 1j * tail_sin


def correlation_modes(bath: DebyeBath, n_modes: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Exponential decomposition of the bath correlation function g''(t).

    Returns (coefficients, rates, markovian_remainder) with

        C(t >= 0) ~= sum_j c_j e^{-gamma_j t},

    where mode 0 is the Drude pole and modes 1..n_modes are Matsubara terms.
    The remainder collects the truncated Matsubara tail as a Markovian
    (delta-correlated) strength, suitable for a closure term.
    """
    lam = bath.lambda_radfs
    wd = bath.omega_d
    beta = bath.beta_fs
    x = 0.5 * beta * wd
    coeffs = [lam * wd * (1.0 / math.tan(x) - 1.0j)]
    rates = [wd]
    if n_modes:
        nu, c = _matsubara_coefficients(bath, n_modes)
        # correlation-function coefficients are c_k * nu_k^2 in terms of the
        # Re g series coefficients: C_k = (4 lam wd / beta) nu_k/(nu_k^2-wd^2)
        coeffs.extend((c * nu ** 2).astype(complex))
        rates.extend(nu)
        partial = float(np.sum(c * nu))
    else:
        partial = 0.0
    total = lam * (2.0 / (beta * wd) - 1.0 / math.tan(x))
    remainder = total - partial
    return np.array(coeffs), np.array(rates, dtype=float), remainder
