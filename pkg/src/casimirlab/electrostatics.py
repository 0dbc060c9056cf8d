"""Cantilever mechanics and the exact sphere-plate electrostatic response.

The frequency shift of the oscillating cantilever in the linear regime is
delta_omega = -gamma(a) (V - V0)^2 - C F'(a) with C = omega_0 / (2 k); the
electrostatic coefficient gamma follows from the exact image-charge series
for the sphere-plate capacitance, parameterised by cosh(kappa) = 1 + a/R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import EPSILON_0
from .errors import ModelError, NumericsError, PrecisionError, ValidityDomainError

__all__ = [
    "CantileverSpec",
    "FrequencyShiftModel",
    "spring_constant",
    "calibration_constant",
    "amplitude_limit",
    "gamma_coefficient",
    "gamma_over_c",
    "frequency_shift",
]


def spring_constant(width: float, thickness: float, length: float, youngs_modulus: float) -> float:
    """Rectangular-beam spring constant w v^3 Y / (4 L^3) in N/m."""
    for name, val in (("width", width), ("thickness", thickness),
                      ("length", length), ("youngs_modulus", youngs_modulus)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    return width * thickness**3 * youngs_modulus / (4.0 * length**3)


def calibration_constant(k: float, omega0: float) -> float:
    """Force-gradient-to-frequency-shift constant omega_0 / (2 k) in s/kg."""
    if not k > 0:
        raise ValueError(f"spring constant must be positive, got {k}")
    if not omega0 > 0:
        raise ValueError(f"resonant frequency must be positive, got {omega0}")
    return omega0 / (2.0 * k)


@dataclass(frozen=True)
class CantileverSpec:
    """Cantilever beam parameters; dimensions optional when k is measured."""

    k: float                    # N/m
    omega0: float               # rad/s
    width: float | None = None
    thickness: float | None = None
    length: float | None = None
    youngs_modulus: float | None = None

    def __post_init__(self):
        if not self.k > 0 or not self.omega0 > 0:
            raise ModelError("k and omega0 must be positive")
        dims = (self.width, self.thickness, self.length, self.youngs_modulus)
        if all(d is not None for d in dims):
            k_beam = spring_constant(*dims)
            if abs(k_beam - self.k) > 0.01 * self.k:
                raise ModelError(
                    f"beam dimensions give k = {k_beam:.4g} N/m, inconsistent "
                    f"with stated k = {self.k:.4g} N/m beyond 1%"
                )

    @property
    def calibration(self) -> float:
        return calibration_constant(self.k, self.omega0)


def amplitude_limit(closest_approach: float) -> float:
    """Largest oscillation amplitude keeping the shift linear, by regime.

    20 nm is safe when the closest approach stays above 600 nm, 10 nm above
    250 nm; smaller approaches are outside the validated linear regime.
    """
    if closest_approach >= 600e-9:
        return 20e-9
    if closest_approach >= 250e-9:
        return 10e-9
    raise ValidityDomainError(
        f"no validated linearity limit below 250 nm closest approach "
        f"(got {closest_approach * 1e9:.0f} nm)"
    )


@dataclass(frozen=True)
class FrequencyShiftModel:
    """Linear frequency-shift response with an amplitude validity guard."""

    calibration: float        # C = omega0/(2k), s/kg
    amplitude: float          # m
    linearity_limit: float    # m

    def __post_init__(self):
        if not self.calibration > 0:
            raise ModelError("calibration constant must be positive")
        if self.amplitude > self.linearity_limit:
            raise ValidityDomainError(
                f"amplitude {self.amplitude * 1e9:.1f} nm exceeds the linear-regime "
                f"limit {self.linearity_limit * 1e9:.1f} nm"
            )


_BLOCK = 512
_MAX_TERMS = 4_000_000


def _sum_many(kappas: np.ndarray, tol: float) -> np.ndarray:
    """Image-series sum for an array of kappa values.

    Terms are csch(n k) { n coth(n k) [n coth(n k) - coth k] - csch^2 k
    + n^2 csch^2(n k) }; they decay like e^{-n kappa}, so summation runs in
    blocks until three consecutive increments per entry fall below
    tol * |partial sum|.
    """
    kappas = np.asarray(kappas, dtype=float)
    em = np.exp(-kappas)
    d = -np.expm1(-2.0 * kappas)
    coth_k = (1.0 + em * em) / d
    csch2_k = (2.0 * em / d) ** 2
    # terms decay like e^{-n kappa}; scaling the per-term threshold by the
    # geometric factor keeps the whole discarded tail below tol * |sum|
    tail_factor = -np.expm1(-kappas)

    total = np.zeros_like(kappas)
    consec = np.zeros_like(kappas, dtype=int)
    active = np.ones_like(kappas, dtype=bool)
    n0 = 1
    while n0 <= _MAX_TERMS:
        n = np.arange(n0, n0 + _BLOCK, dtype=float)
        x = kappas[active][:, None] * n[None, :]
        em_n = np.exp(-x)
        d_n = -np.expm1(-2.0 * x)
        coth_n = (1.0 + em_n * em_n) / d_n
        csch_n = 2.0 * em_n / d_n
        ncoth = n[None, :] * coth_n
        terms = csch_n * (
            ncoth * (ncoth - coth_k[active][:, None])
            - csch2_k[active][:, None]
            + (n[None, :] * csch_n) ** 2
        )

        sub = total[active]
        sub_consec = consec[active]
        thr = tol * tail_factor[active]
        done = np.zeros(sub.shape, dtype=bool)
        for j in range(terms.shape[1]):
            t = terms[:, j]
            sub = sub + np.where(done, 0.0, t)
            small = np.abs(t) < thr * np.abs(sub)
            small &= sub != 0.0
            sub_consec = np.where(done, sub_consec, np.where(small, sub_consec + 1, 0))
            done |= sub_consec >= 3
            if done.all():
                break
        total[active] = sub
        consec[active] = sub_consec
        still = ~done
        idx = np.nonzero(active)[0]
        active[idx[done]] = False
        if not active.any():
            return total
        n0 += _BLOCK
    raise NumericsError("electrostatic image series did not converge")


def _kappa(a: float, R: float) -> float:
    """arccosh(1 + a/R) evaluated without cancellation for small a/R."""
    x = a / R
    if x < 1e-9:
        raise PrecisionError(
            f"a/R = {x:.2e} < 1e-9 loses all digits in kappa; use the "
            "proximity asymptote C pi eps0 R / a^2 instead"
        )
    return math.log1p(x + math.sqrt(x * (x + 2.0)))


def gamma_over_c(a, R: float, tol: float = 1e-10):
    """gamma / C, i.e. the calibration-independent electrostatic coefficient.

    Vectorised over a; used directly by the calibration fit where C is a
    free linear parameter.
    """
    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(a_arr <= 0) or not R > 0:
        raise ValueError("a and R must be positive")
    kappas = np.array([_kappa(ai, R) for ai in a_arr])
    s = _sum_many(kappas, tol)
    out = 2.0 * math.pi * EPSILON_0 / np.sqrt(a_arr * (2.0 * R + a_arr)) * s
    return float(out[0]) if np.ndim(a) == 0 else out


def gamma_coefficient(a: float, R: float, c_cal: float, tol: float = 1e-10) -> float:
    """Electrostatic frequency-shift coefficient gamma in rad s^-1 V^-2.

    Evaluates the exact sphere-plate image series with
    cosh(kappa) = 1 + a/R, terminating once three consecutive increments
    fall below tol relative to the partial sum.

    Parameters
    ----------
    a : float
        Absolute separation in m, > 0.
    R : float
        Sphere radius in m, > 0.
    c_cal : float
        Calibration constant omega_0/(2k) in s/kg.
    tol : float
        Relative series-termination threshold.
    """
    return c_cal * gamma_over_c(a, R, tol)


def frequency_shift(a: float, v: float, v0: float, gamma_fn, fprime_fn, c_cal: float) -> float:
    """Linear-regime shift -gamma(a) (V - V0)^2 - C F'(a) in rad/s.

    gamma_fn and fprime_fn map separation to the electrostatic coefficient
    and the force gradient (positive = attractive).
    """
    dv = v - v0
    return -gamma_fn(a) * dv * dv - c_cal * fprime_fn(a)
