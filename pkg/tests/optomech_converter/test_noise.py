import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from optomech_converter.errors import GridError, ParameterDomainError
from optomech_converter.model import DriveConfig, derive_rates, drive_for_cooperativity
from optomech_converter.noise import (SynthesisConfig, added_noise, added_noise_curve, bose_occupancy,
                                      emitted_peak, floor_from_noise_temperature, lorentzian, lorentzian_area,
                                      output_noise_spectrum, rayleigh_jeans_occupancy, synthesize_spectrum)
from optomech_converter.scattering import scattering_on_resonance


def balanced(device, c_total):
    return derive_rates(device, drive_for_cooperativity(device, c_total / 2.0, c_total / 2.0))


class TestOccupancy:
    def test_mechanical_bath_at_base_temperature(self):
        assert bose_occupancy(14.98e6, 0.030) == pytest.approx(41.2, abs=0.1)

    def test_noise_floor_from_temperature(self):
        """Test 9.5 K at 8.89 GHz in both conventions."""
        assert floor_from_noise_temperature(9.5, 8.89e9) == pytest.approx(21.77, abs=0.01)
        assert floor_from_noise_temperature(9.5, 8.89e9, form="rayleigh-jeans") == pytest.approx(22.27, abs=0.01)

    def test_classical_limit(self):
        assert bose_occupancy(1e6, 10.0) == pytest.approx(rayleigh_jeans_occupancy(1e6, 10.0), rel=1e-4)

    def test_unknown_form(self):
        with pytest.raises(ParameterDomainError):
            floor_from_noise_temperature(9.5, 8.89e9, form="planck")

    def test_zero_temperature(self):
        with pytest.raises(ParameterDomainError):
            bose_occupancy(1e9, 0.0)


class TestAddedNoise:
    """Test input-referred added noise."""

    def test_balanced_values(self, device):
        rates = balanced(device, 2520.0)
        result = added_noise(rates, 0.96, 0.99, 60.0)
        assert result.n_add_1 == pytest.approx(60.0 / (0.96 * 1260.0))
        assert result.n_add_2 == pytest.approx(60.0 / (0.99 * 1260.0))
        assert result.n_m == pytest.approx(60.0 / 2521.0)
        assert result.bound_ok == (True, True)
        assert result.diagnostics == ()

    def test_zero_cooperativity_is_unbounded(self, device, caplog):
        rates = derive_rates(device, drive_for_cooperativity(device, 100.0, 0.0))
        result = added_noise(rates, 0.96, 0.99, 60.0)
        assert math.isinf(result.n_add_2)
        assert math.isfinite(result.n_add_1)
        assert len(result.diagnostics) == 1
        assert "unbounded" in caplog.text

    def test_cold_bath(self, device):
        result = added_noise(balanced(device, 100.0), 0.96, 0.99, 0.0)
        assert result.n_add_1 == 0.0
        assert result.n_m == 0.0

    def test_negative_bath(self, device):
        with pytest.raises(ParameterDomainError):
            added_noise(balanced(device, 100.0), 0.96, 0.99, -1.0)

    def test_added_noise_exceeds_twice_occupancy(self, device):
        """Test n_add_i > 2 n_m for lossy coupling when the opposite drive is at least as strong."""
        rng = np.random.default_rng(21)
        for _ in range(100):
            c_i = 10 ** rng.uniform(-2, 4)
            c_j = c_i * rng.uniform(1.0, 10.0)
            eta1, eta2 = rng.uniform(0.05, 0.999, size=2)
            n_th = rng.uniform(1.0, 500.0)
            for c1, c2, index in ((c_i, c_j, 0), (c_j, c_i, 1)):
                rates = derive_rates(device, drive_for_cooperativity(device, c1, c2))
                result = added_noise(rates, eta1, eta2, n_th)
                assert (result.n_add_1, result.n_add_2)[index] > 2 * result.n_m
                assert result.bound_ok[index]

    def test_one_sided_drive_breaks_the_bound(self, device):
        rates = derive_rates(device, drive_for_cooperativity(device, 1e4, 0.0))
        result = added_noise(rates, 0.99, 0.99, 60.0)
        assert result.n_add_1 < 2 * result.n_m
        assert result.bound_ok == (False, True)

    def test_curve(self, device):
        frame = added_noise_curve(device, [10.0, 100.0, 1000.0])
        assert list(frame.columns) == ["c_total", "n_add_1", "n_add_2", "n_m"]
        assert frame["n_add_1"].is_monotonic_decreasing


class TestEmittedSpectrum:
    def test_peak_reference_value(self, device):
        rates = balanced(device, 2520.0)
        assert emitted_peak(rates, 0.96, 1, 60.0) == pytest.approx(0.04568, abs=2e-5)

    def test_peak_is_referred_added_noise(self, device):
        """Test peak emitted by cavity 1 = n_add referred to input 2 times |t(0)|^2."""
        rates = derive_rates(device, drive_for_cooperativity(device, 300.0, 900.0))
        noise = added_noise(rates, 0.96, 0.99, 60.0)
        t_sq = 4 * 0.96 * 0.99 * 300.0 * 900.0 / 1201.0 ** 2
        assert emitted_peak(rates, 0.96, 1, 60.0) == pytest.approx(noise.n_add_2 * t_sq, rel=1e-12)

    def test_peak_identity_for_random_parameters(self, device):
        rng = np.random.default_rng(22)
        for _ in range(100):
            c1, c2 = 10 ** rng.uniform(-2, 4, size=2)
            eta1, eta2 = rng.uniform(0.05, 1.0, size=2)
            n_th = rng.uniform(0.0, 500.0)
            rates = derive_rates(device, drive_for_cooperativity(device, c1, c2))
            noise = added_noise(rates, eta1, eta2, n_th)
            t_sq = scattering_on_resonance(rates, eta1, eta2).t_sq
            assert emitted_peak(rates, eta1, 1, n_th) == pytest.approx(noise.n_add_2 * t_sq, rel=1e-12, abs=1e-300)
            assert emitted_peak(rates, eta2, 2, n_th) == pytest.approx(noise.n_add_1 * t_sq, rel=1e-12, abs=1e-300)

    def test_lorentzian_spectrum(self, device):
        rates = balanced(device, 160.0)
        deltas = np.linspace(-10 * rates.gamma_total, 10 * rates.gamma_total, 2001)
        spectrum = output_noise_spectrum(device, rates, 1, 60.0, 21.8, deltas)
        peak = emitted_peak(rates, 0.96, 1, 60.0)
        assert peak == pytest.approx(0.711, abs=2e-3)
        assert spectrum.values[1000] == pytest.approx(21.8 + peak)
        half = np.argmin(np.abs(deltas - 0.5 * rates.gamma_total))
        assert spectrum.values[half] == pytest.approx(21.8 + 0.5 * peak, rel=1e-4)
        assert spectrum.metadata()["which_cavity"] == 1

    def test_full_lineshape_agrees_on_resonance(self, device):
        rates = balanced(device, 160.0)
        deltas = np.linspace(-2 * rates.gamma_total, 2 * rates.gamma_total, 41)
        lorentz = output_noise_spectrum(device, rates, 2, 60.0, 0.0, deltas)
        full = output_noise_spectrum(device, rates, 2, 60.0, 0.0, deltas, lineshape="full")
        assert full.values[20] == pytest.approx(lorentz.values[20], rel=1e-9)
        np.testing.assert_allclose(full.values, lorentz.values, rtol=1e-2)

    def test_no_drive_no_line(self, device):
        rates = derive_rates(device, DriveConfig())
        spectrum = output_noise_spectrum(device, rates, 1, 60.0, 5.0, [-1.0, 0.0, 1.0])
        np.testing.assert_allclose(spectrum.values, 5.0)

    def test_unsorted_grid(self, device):
        rates = balanced(device, 160.0)
        with pytest.raises(GridError):
            output_noise_spectrum(device, rates, 1, 60.0, 0.0, [0.0, -1.0, 1.0])

    def test_lorentzian_area(self):
        deltas = np.linspace(-1e4, 1e4, 200001)
        values = lorentzian(deltas, 0.0, 10.0, 2.0, 0.0)
        numeric = trapezoid(values, deltas)
        assert numeric == pytest.approx(lorentzian_area(2.0, 10.0), rel=2e-3)


class TestSynthesis:
    """Test seeded radiometer noise."""

    @pytest.fixture
    def clean(self, device):
        rates = balanced(device, 160.0)
        deltas = np.linspace(-10 * rates.gamma_total, 10 * rates.gamma_total, 2001)
        return output_noise_spectrum(device, rates, 1, 60.0, 21.8, deltas)

    def test_seed_reproducible(self, clean):
        first = synthesize_spectrum(clean, SynthesisConfig(), seed=11)
        second = synthesize_spectrum(clean, SynthesisConfig(), seed=11)
        np.testing.assert_array_equal(first.values, second.values)
        assert first.seed == 11
        assert first.n_avg == 1e4

    def test_noise_scale(self, clean):
        noisy = synthesize_spectrum(clean, SynthesisConfig(n_avg=1e4), seed=3)
        residual = (noisy.values - clean.values) / (clean.values / 100.0)
        assert np.std(residual) == pytest.approx(1.0, abs=0.1)

    def test_invalid_averaging(self):
        with pytest.raises(ParameterDomainError):
            SynthesisConfig(n_avg=0)
