import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import zeta

from casimirlab.constants import C_LIGHT, HBAR, K_B, ev_to_rad_per_s
from casimirlab.errors import AmbiguousZeroTermError, ValidityDomainError
from casimirlab.lifshitz import (
    IDEAL_METAL,
    MatsubaraCache,
    MatsubaraSpectrum,
    casimir_pressure,
    matsubara_frequency,
    pressure_sweep,
    pressure_sweep_text,
    reflection_coefficients,
)
from casimirlab.optics import AU_DRUDE, Drude, Plasma

T_LAB = 293.15
DRUDE = Drude(AU_DRUDE)
PLASMA = Plasma(AU_DRUDE)


class TestMatsubara:
    def test_zeroth_frequency_vanishes(self):
        for temp in (4.2, 77.0, 293.15):
            assert matsubara_frequency(0, temp) == 0.0

    def test_first_frequency_constant_arithmetic(self):
        # 2 pi k_B T / hbar at 293.15 K
        expected = 2.0 * math.pi * K_B * 293.15 / HBAR
        got = matsubara_frequency(1, 293.15)
        assert got == pytest.approx(expected, rel=1e-15)
        assert got == pytest.approx(2.4116e14, rel=1e-3)
        assert got * HBAR / 1.602176634e-19 == pytest.approx(0.1587, abs=2e-4)

    def test_linearity_in_index(self):
        x1 = matsubara_frequency(1, T_LAB)
        assert matsubara_frequency(10, T_LAB) == pytest.approx(10.0 * x1, rel=1e-15)

    def test_spectrum_object(self):
        sp = MatsubaraSpectrum(temperature=T_LAB, max_index=5)
        f = sp.frequencies
        assert f[0] == 0.0
        assert np.all(np.diff(f) > 0)
        assert np.allclose(np.diff(f), f[1])

    def test_preconditions(self):
        with pytest.raises(ValueError):
            matsubara_frequency(-1, T_LAB)
        with pytest.raises(ValueError):
            matsubara_frequency(1, 0.0)


class _HugeEps:
    """Surrogate with enormous permittivity for the ideal-metal limit."""

    zero_tag = "drude"
    omega_p = 1.0

    def epsilon(self, xi):
        return 1e14 * np.ones_like(np.asarray(xi, dtype=float))


class _Untagged:
    def epsilon(self, xi):
        return 2.0


class TestReflection:
    def test_drude_zero_frequency(self):
        for k in (1e5, 1e6, 1e7):
            r = reflection_coefficients(DRUDE, 0.0, k)
            assert r.r_tm == 1.0
            assert r.r_te == 0.0

    def test_plasma_zero_frequency(self):
        k = 2e6
        r = reflection_coefficients(PLASMA, 0.0, k)
        s = math.hypot(k, PLASMA.omega_p / C_LIGHT)
        assert r.r_tm == 1.0
        assert r.r_te == pytest.approx((k - s) / (k + s), rel=1e-14)
        assert -1.0 < r.r_te < 0.0

    def test_ideal_metal_limit_of_large_eps(self):
        xi = ev_to_rad_per_s(0.2)
        r = reflection_coefficients(_HugeEps(), xi, 1e6)
        assert r.r_tm == pytest.approx(1.0, abs=1e-6)
        assert r.r_te == pytest.approx(-1.0, abs=1e-6)
        ideal = reflection_coefficients(IDEAL_METAL, xi, 1e6)
        assert (ideal.r_tm, ideal.r_te) == (1.0, -1.0)

    def test_untagged_zero_term_is_ambiguous(self):
        with pytest.raises(AmbiguousZeroTermError):
            reflection_coefficients(_Untagged(), 0.0, 1e6)

    def test_magnitudes_bounded(self):
        for model in (DRUDE, PLASMA):
            for xi_ev in (1e-3, 0.16, 3.0, 50.0):
                for k in (1e4, 1e6, 1e8):
                    r = reflection_coefficients(model, ev_to_rad_per_s(xi_ev), k)
                    assert abs(r.r_tm) <= 1.0
                    assert abs(r.r_te) <= 1.0

    def test_preconditions(self):
        with pytest.raises(ValueError):
            reflection_coefficients(DRUDE, -1.0, 1e6)
        with pytest.raises(ValueError):
            reflection_coefficients(DRUDE, 1e14, 0.0)


class TestPressureOracles:
    def test_ideal_metal_low_temperature_limit(self):
        # analytic T = 0 ideal-reflector result as the oracle
        for a_nm in (250.0, 500.0, 1000.0, 1300.0):
            a = a_nm * 1e-9
            exact = -math.pi**2 * HBAR * C_LIGHT / (240.0 * a**4)
            res = casimir_pressure(IDEAL_METAL, a, temperature=10.0, tol=1e-9)
            assert res.pressure == pytest.approx(exact, rel=1e-3)

    def test_drude_zero_term_closed_form(self):
        # the l = 0 integral for a drude-tagged metal is TM-only with
        # r = 1: -k_B T zeta(3) / (8 pi a^3)
        for a in (1e-6, 3e-6):
            res = casimir_pressure(DRUDE, a, T_LAB, tol=1e-10, with_breakdown=True)
            exact = -K_B * T_LAB * zeta(3) / (8.0 * math.pi * a**3)
            assert res.term_breakdown[0] == pytest.approx(exact, rel=1e-4)

    def test_attractive_and_monotone(self):
        grid = np.linspace(250e-9, 1300e-9, 22)
        for model in (DRUDE, PLASMA):
            p, _ = pressure_sweep(model, grid, T_LAB, tol=1e-8)
            assert np.all(p < 0)
            assert np.all(np.diff(-p) < 0)

    def test_metal_like_pressure_negative_wide_range(self):
        for a in (100e-9, 1e-6, 10e-6):
            assert casimir_pressure(DRUDE, a, T_LAB, 1e-7).pressure < 0

    def test_table_model_tracks_analytic_drude_pressure(self):
        # a drude-tagged absorption table synthesised from the analytic
        # model must run through the whole thermal sum and land on the
        # analytic pressure within the table-resolution error
        from casimirlab.optics import OpticalTable, Tabulated

        wp, g = AU_DRUDE.plasma_energy, AU_DRUDE.relaxation_energy
        w = np.geomspace(1e-4, 2e3, 2000)
        table = Tabulated(OpticalTable(
            photon_energies=tuple(w),
            im_epsilon=tuple(wp * wp * g / (w * (w * w + g * g))),
            extrapolation="drude",
            drude=AU_DRUDE,
        ))
        for a in (300e-9, 800e-9):
            p_table = casimir_pressure(table, a, T_LAB, 1e-8).pressure
            p_exact = casimir_pressure(DRUDE, a, T_LAB, 1e-8).pressure
            assert p_table == pytest.approx(p_exact, rel=2e-4)


def _kperp_term_oracle(model, l, a, temperature):
    """Direct k-perp integration of one Matsubara term, in Pa (unit weight)."""
    xi = matsubara_frequency(l, temperature)
    eps = model.epsilon(xi)

    def integrand(k):
        q = math.hypot(k, xi / C_LIGHT)
        kl = math.sqrt(k * k + eps * (xi / C_LIGHT) ** 2)
        r_tm = (eps * q - kl) / (eps * q + kl)
        r_te = (q - kl) / (q + kl)
        total = 0.0
        for r in (r_tm, r_te):
            total += 1.0 / (math.exp(2.0 * a * q) / (r * r) - 1.0)
        return q * k * total

    upper = 60.0 / (2.0 * a)
    val, _ = quad(integrand, 0.0, upper, epsabs=0.0, epsrel=1e-11, limit=400)
    return -K_B * temperature / math.pi * val


class TestPressureProperties:
    def test_primed_sum_convention(self):
        res = casimir_pressure(DRUDE, 500e-9, T_LAB, 1e-10, with_breakdown=True)
        terms = res.term_breakdown
        # full-weight zero term minus half of it reproduces the primed sum
        full = math.fsum([2.0 * terms[0]] + list(terms[1:])) - terms[0]
        assert full == pytest.approx(res.pressure, rel=1e-15)
        assert math.fsum(terms) == pytest.approx(res.pressure, rel=1e-15)

    def test_plasma_exceeds_drude_with_growing_gap(self):
        grid = np.linspace(250e-9, 1300e-9, 22)
        pd, _ = pressure_sweep(DRUDE, grid, T_LAB, 1e-9)
        pp, _ = pressure_sweep(PLASMA, grid, T_LAB, 1e-9)
        assert np.all(np.abs(pp) > np.abs(pd))
        rel_gap = (np.abs(pp) - np.abs(pd)) / np.abs(pd)
        assert np.all(np.diff(rel_gap) > 0)

    @pytest.mark.parametrize("a", [300e-9, 900e-9])
    def test_halving_tolerance(self, a):
        for tol in (1e-6, 1e-8):
            p1 = casimir_pressure(DRUDE, a, T_LAB, tol).pressure
            p2 = casimir_pressure(DRUDE, a, T_LAB, tol / 2.0).pressure
            assert abs(p2 - p1) <= tol * abs(p1)

    def test_substitution_invariance_against_kperp_oracle(self):
        # the y = 2 a q substitution must agree with direct k-perp
        # integration term by term
        a = 400e-9
        res = casimir_pressure(DRUDE, a, T_LAB, 1e-10, with_breakdown=True)
        for l in (1, 3, 10):
            oracle = _kperp_term_oracle(DRUDE, l, a, T_LAB)
            assert res.term_breakdown[l] == pytest.approx(oracle, rel=1e-8)

    def test_parallel_matches_serial_summation(self):
        for model in (DRUDE, PLASMA, IDEAL_METAL):
            serial = casimir_pressure(model, 350e-9, T_LAB, 1e-9, parallel=False)
            thread = casimir_pressure(model, 350e-9, T_LAB, 1e-9, parallel=True)
            assert thread.pressure == pytest.approx(serial.pressure, rel=1e-12)
            assert thread.n_terms == serial.n_terms

    def test_truncation_estimate_bounds_tail(self):
        # loosely-converged run must sit within its own truncation bound of
        # a tightly-converged one
        loose = casimir_pressure(DRUDE, 300e-9, T_LAB, 1e-5)
        tight = casimir_pressure(DRUDE, 300e-9, T_LAB, 1e-11)
        assert abs(loose.pressure - tight.pressure) <= loose.truncation_error_estimate \
            + 1e-5 * abs(tight.pressure)

    def test_cache_reuse_matches_fresh_evaluation(self):
        cache = MatsubaraCache(DRUDE, T_LAB)
        for a in (300e-9, 600e-9, 900e-9):
            fresh = casimir_pressure(DRUDE, a, T_LAB, 1e-9)
            cached = casimir_pressure(DRUDE, a, T_LAB, 1e-9, cache=cache)
            assert cached.pressure == fresh.pressure

    def test_domain_checks(self):
        with pytest.raises(ValidityDomainError):
            casimir_pressure(DRUDE, 10e-9, T_LAB)
        with pytest.raises(ValidityDomainError):
            casimir_pressure(DRUDE, 1e-3, T_LAB)
        with pytest.raises(ValueError):
            casimir_pressure(DRUDE, 1e-6, T_LAB, tol=1e-2)
        with pytest.raises(ValueError):
            casimir_pressure(DRUDE, 1e-6, -1.0)

    def test_sweep_text_layout(self):
        grid = np.array([500e-9, 600e-9])
        by_label = {
            "drude": pressure_sweep(DRUDE, grid, T_LAB, 1e-7),
            "plasma": pressure_sweep(PLASMA, grid, T_LAB, 1e-7),
        }
        text = pressure_sweep_text(grid, by_label)
        assert "a_nm" in text and "P_drude_Pa" in text and "P_plasma_Pa" in text
        assert "trunc_drude_Pa" in text
        rows = [l for l in text.splitlines() if not l.startswith("#")]
        assert len(rows) == 2
