import numpy as np
import pytest

from casimirlab.constants import ev_to_rad_per_s
from casimirlab.errors import ConfigError, DivergentAtZeroError, ModelError
from casimirlab.optics import (
    AU_CORE_OSCILLATORS,
    AU_DRUDE,
    Drude,
    DrudeParams,
    OpticalTable,
    Oscillator,
    Plasma,
    Tabulated,
    eval_permittivity,
    load_model,
    load_optical_table,
)

EV = ev_to_rad_per_s(1.0)


def drude_im_eps(w_ev):
    """Analytic Drude absorption for the table cross-checks, in eV units."""
    wp, g = AU_DRUDE.plasma_energy, AU_DRUDE.relaxation_energy
    return wp * wp * g / (w_ev * (w_ev * w_ev + g * g))


def synthetic_drude_table(n=3000, lo=1e-4, hi=2e3):
    w = np.geomspace(lo, hi, n)
    return OpticalTable(
        photon_energies=tuple(w),
        im_epsilon=tuple(drude_im_eps(w)),
        extrapolation="drude",
        drude=AU_DRUDE,
    )


class TestEvaluation:
    def test_plasma_at_own_plasma_frequency_is_two(self):
        model = Plasma(DrudeParams(9.0, 0.0))
        assert eval_permittivity(model, 9.0 * EV) == pytest.approx(2.0, rel=1e-14)

    def test_drude_at_relaxation_energy(self):
        # 1 + 81 / (0.035 * 0.070) from the stated free-electron parameters
        model = Drude(AU_DRUDE)
        expected = 1.0 + 81.0 / (0.035 * 0.070)
        assert eval_permittivity(model, 0.035 * EV) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("model", [
        Drude(AU_DRUDE),
        Plasma(AU_DRUDE),
        Drude(AU_DRUDE, AU_CORE_OSCILLATORS),
        Plasma(AU_DRUDE, AU_CORE_OSCILLATORS),
        Tabulated(synthetic_drude_table(800)),
    ])
    def test_high_frequency_transparency(self, model):
        # eps -> 1 bounded by K/xi^2 with K the total spectral weight
        xi = np.array([200.0, 400.0, 800.0]) * EV
        eps = model.epsilon(xi)
        weight = AU_DRUDE.plasma_energy**2 + sum(
            o.strength * o.resonance_energy**2 for o in getattr(model, "oscillators", ())
        )
        bound = 2.0 * weight * (EV / xi) ** 2
        assert np.all(eps - 1.0 > 0)
        assert np.all(eps - 1.0 < bound)

    def test_zero_frequency_raises(self):
        for model in (Drude(AU_DRUDE), Plasma(AU_DRUDE), Tabulated(synthetic_drude_table(50))):
            with pytest.raises(DivergentAtZeroError):
                eval_permittivity(model, 0.0)

    def test_negative_frequency_rejected(self):
        with pytest.raises(ValueError):
            eval_permittivity(Drude(AU_DRUDE), -1.0)


class TestInvariants:
    @pytest.mark.parametrize("model", [
        Drude(AU_DRUDE),
        Plasma(AU_DRUDE),
        Drude(AU_DRUDE, AU_CORE_OSCILLATORS),
        Plasma(AU_DRUDE, AU_CORE_OSCILLATORS),
        Tabulated(synthetic_drude_table(600)),
    ])
    def test_strictly_decreasing_in_xi(self, model):
        xi = np.geomspace(1e-3, 1e3, 60) * EV
        eps = model.epsilon(xi)
        assert np.all(np.diff(eps) < 0)
        assert np.all(eps >= 1.0)
        assert np.all(np.isfinite(eps))

    def test_plasma_dominates_drude_at_shared_plasma_frequency(self):
        drude = Drude(AU_DRUDE)
        plasma = Plasma(DrudeParams(AU_DRUDE.plasma_energy, 0.0))
        xi = np.geomspace(1e-3, 1e3, 40) * EV
        assert np.all(plasma.epsilon(xi) >= drude.epsilon(xi))
        # equality restored as the relaxation rate vanishes
        nearly = Drude(DrudeParams(9.0, 1e-12))
        assert plasma.epsilon(1.0 * EV) == pytest.approx(nearly.epsilon(1.0 * EV), rel=1e-10)

    def test_plasma_algebraic_identity(self):
        model = Plasma(AU_DRUDE)
        for xi_ev in (0.01, 0.5, 7.0, 300.0):
            xi = xi_ev * EV
            assert xi * xi * (model.epsilon(xi) - 1.0) == pytest.approx(
                model.omega_p**2, rel=1e-12
            )

    def test_table_reproduces_analytic_drude(self):
        # table synthesised from the analytic Drude absorption must give
        # back the analytic eps(i xi); residual limited by the table's
        # piecewise-linear resolution and high-frequency truncation
        model = Tabulated(synthetic_drude_table())
        ref = Drude(AU_DRUDE)
        xi = np.geomspace(1e-3, 100.0, 25) * EV
        assert model.epsilon(xi) == pytest.approx(ref.epsilon(xi), rel=2e-4)


class TestValidation:
    def test_empty_table_rejected(self):
        with pytest.raises(ModelError):
            OpticalTable((), (), "drude", AU_DRUDE)

    def test_non_increasing_energies_rejected(self):
        with pytest.raises(ModelError):
            OpticalTable((1.0, 1.0), (0.1, 0.1), "drude", AU_DRUDE)

    def test_negative_absorption_rejected(self):
        with pytest.raises(ModelError):
            OpticalTable((1.0, 2.0), (0.1, -0.1), "drude", AU_DRUDE)

    def test_bad_drude_params(self):
        with pytest.raises(ModelError):
            DrudeParams(-1.0, 0.0)
        with pytest.raises(ModelError):
            DrudeParams(9.0, -0.1)

    def test_bad_oscillator(self):
        with pytest.raises(ModelError):
            Oscillator(strength=-1.0, resonance_energy=1.0, width_energy=0.1)
        with pytest.raises(ModelError):
            Oscillator(strength=1.0, resonance_energy=0.0, width_energy=0.1)


class TestFileLoading:
    def test_optical_table_file(self, tmp_path):
        path = tmp_path / "au.dat"
        path.write_text("# photon_energy_ev  im_eps\n0.5 10.0\n1.0 4.0\n2.0 1.0\n")
        table = load_optical_table(path, "drude", AU_DRUDE)
        assert table.photon_energies == (0.5, 1.0, 2.0)
        assert table.im_epsilon == (10.0, 4.0, 1.0)

    def test_model_config_drude(self, tmp_path):
        path = tmp_path / "model.cfg"
        path.write_text(
            "# gold, free electrons only\n"
            "variant = drude\n"
            "plasma_energy_ev = 9.0\n"
            "relaxation_energy_ev = 0.035\n"
        )
        model = load_model(path)
        assert isinstance(model, Drude)
        assert model.params == AU_DRUDE

    def test_model_config_with_oscillators(self, tmp_path):
        path = tmp_path / "model.cfg"
        path.write_text(
            "variant = plasma+oscillators\n"
            "plasma_energy_ev = 9.0\n"
            "oscillator = 2.0 3.0 0.5\n"
            "oscillator = 1.0 5.0 1.0\n"
        )
        model = load_model(path)
        assert isinstance(model, Plasma)
        assert len(model.oscillators) == 2
        assert model.oscillators[0] == Oscillator(2.0, 3.0, 0.5)

    def test_model_config_table(self, tmp_path):
        (tmp_path / "au.dat").write_text("0.5 10.0\n1.0 4.0\n")
        path = tmp_path / "model.cfg"
        path.write_text(
            "variant = table\n"
            "table_file = au.dat\n"
            "extrapolation = plasma\n"
            "plasma_energy_ev = 9.0\n"
            "relaxation_energy_ev = 0.035\n"
        )
        model = load_model(path)
        assert isinstance(model, Tabulated)
        assert model.zero_tag == "plasma"

    def test_model_config_errors(self, tmp_path):
        path = tmp_path / "model.cfg"
        path.write_text("variant = nosuch\nplasma_energy_ev = 9.0\n")
        with pytest.raises(ConfigError):
            load_model(path)
        path.write_text("plasma_energy_ev = 9.0\n")
        with pytest.raises(ConfigError):
            load_model(path)
        path.write_text("variant = drude\n???\n")
        with pytest.raises(ConfigError):
            load_model(path)
