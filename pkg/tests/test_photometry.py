"""Photometry and colorimetry tests against closed-form and standard reference values."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vlcsim import photometry as ph
from vlcsim.errors import NoMeaningfulCctError, UndefinedChromaticityError


def monochromatic(wavelength_nm, watts_per_nm=1.0):
    v = np.zeros_like(ph.GRID)
    v[int(wavelength_nm - 380)] = watts_per_nm
    return ph.SpectralDistribution(v)


class TestSpectralDistribution:
    def test_grid_shape_enforced(self):
        with pytest.raises(ValueError):
            ph.SpectralDistribution(np.ones(100))

    def test_negative_rejected(self):
        v = np.ones_like(ph.GRID)
        v[0] = -1.0
        with pytest.raises(ValueError):
            ph.SpectralDistribution(v)

    def test_linear_ops(self):
        a = ph.SpectralDistribution(np.ones_like(ph.GRID))
        b = 2.0 * a + a
        assert b.total_power() == pytest.approx(3 * a.total_power(), rel=1e-12)


class TestHModel:
    def test_unit_value_at_peak(self):
        for p in ph.LED_CHANNELS.values():
            assert ph.h_model_value(p.peak_nm, p) == pytest.approx(1.0, abs=1e-15)

    def test_closed_form_right_width_point(self):
        p = ph.LED_CHANNELS["red"]
        expected = (np.exp(-1) + 2 * np.exp(-6)) / 3  # 0.12427898184159168
        assert ph.h_model_value(p.peak_nm + p.width_right_nm, p) == pytest.approx(
            expected, abs=1e-12
        )

    def test_grid_peak_is_one(self):
        for p in ph.LED_CHANNELS.values():
            spd = ph.h_model_spd(p)
            assert spd.values.max() == pytest.approx(1.0, abs=0)
            nearest = int(np.argmin(np.abs(ph.GRID - p.peak_nm)))
            assert spd.values[nearest] == 1.0

    def test_asymmetry(self):
        p = ph.LED_CHANNELS["green"]  # broader right side
        left = ph.h_model_value(p.peak_nm - 20.0, p)
        right = ph.h_model_value(p.peak_nm + 20.0, p)
        assert right > left

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            ph.HModelParams(500.0, -1.0, 10.0, 2.0, 5.0)
        with pytest.raises(ValueError):
            ph.HModelParams(500.0, 10.0, 10.0, 2.0, 0.5)


class TestScaleToPower:
    def test_zero_target(self):
        spd = ph.scale_to_power(ph.h_model_spd(ph.LED_CHANNELS["red"]), 0.0)
        assert np.all(spd.values == 0.0)

    def test_reaches_target(self):
        spd = ph.scale_to_power(ph.h_model_spd(ph.LED_CHANNELS["blue"]), 7.5)
        assert spd.total_power() == pytest.approx(7.5, rel=1e-9)

    def test_linearity(self):
        base = ph.scale_to_power(ph.h_model_spd(ph.LED_CHANNELS["amber"]), 1.0)
        double = ph.scale_to_power(base, 2.0)
        assert np.allclose(double.values, 2.0 * base.values)

    def test_zero_spectrum_rejected(self):
        with pytest.raises(ValueError):
            ph.scale_to_power(ph.SpectralDistribution(np.zeros_like(ph.GRID)), 1.0)


class TestFluxAndIlluminance:
    def test_zero_spd(self):
        assert ph.luminous_flux(ph.SpectralDistribution(np.zeros_like(ph.GRID))) == 0.0

    def test_monochromatic_555(self):
        assert ph.luminous_flux(monochromatic(555)) == pytest.approx(683.0, rel=1e-6)

    def test_flux_linearity(self):
        a = ph.scale_to_power(ph.h_model_spd(ph.LED_CHANNELS["red"]), 3.0)
        b = ph.scale_to_power(ph.h_model_spd(ph.LED_CHANNELS["green"]), 1.5)
        combined = ph.luminous_flux(2.0 * a + 0.5 * b)
        assert combined == pytest.approx(
            2.0 * ph.luminous_flux(a) + 0.5 * ph.luminous_flux(b), rel=1e-9
        )

    def test_flux_against_trapezoid_oracle(self):
        spd = ph.white_mix_spd(100.0)
        vbar = ph.load_cmf()[:, 1]
        oracle = 683.0 * np.trapezoid(spd.values * vbar, ph.GRID)
        assert ph.luminous_flux(spd) == pytest.approx(oracle, rel=1e-3)

    def test_illuminance(self):
        assert ph.illuminance(683.0, 1.0) == 683.0
        assert ph.illuminance(0.0, 2.0) == 0.0
        with pytest.raises(ValueError):
            ph.illuminance(1.0, 0.0)


class TestChromaticity:
    def test_equal_xyz(self):
        assert ph.chromaticity(ph.TristimulusXYZ(1, 1, 1)) == pytest.approx((1 / 3, 1 / 3))

    def test_equal_energy_spd(self):
        x, y = ph.chromaticity(ph.tristimulus(ph.SpectralDistribution(np.ones_like(ph.GRID))))
        assert x == pytest.approx(1 / 3, abs=2e-4)
        assert y == pytest.approx(1 / 3, abs=2e-4)

    def test_scale_invariance(self):
        xyz = ph.TristimulusXYZ(0.3, 0.5, 0.2)
        scaled = ph.TristimulusXYZ(
            xyz.X * 7.7, xyz.Y * 7.7, xyz.Z * 7.7
        )
        assert ph.chromaticity(scaled) == pytest.approx(ph.chromaticity(xyz), rel=1e-12)

    @given(
        st.floats(0.01, 10),
        st.floats(0.01, 10),
        st.floats(0.01, 10),
        st.floats(1e-3, 1e3),
    )
    @settings(max_examples=60, deadline=None)
    def test_scale_invariance_property(self, x, y, z, c):
        base = ph.chromaticity(ph.TristimulusXYZ(x, y, z))
        scaled = ph.chromaticity(ph.TristimulusXYZ(c * x, c * y, c * z))
        assert scaled == pytest.approx(base, rel=1e-9)

    def test_zero_rejected(self):
        with pytest.raises(UndefinedChromaticityError):
            ph.chromaticity(ph.TristimulusXYZ(0, 0, 0))

    def test_red_channel_near_spectral_locus(self):
        x, y = ph.chromaticity(ph.tristimulus(ph.h_model_spd(ph.LED_CHANNELS["red"])))
        # dominant wavelength around 630 nm: strongly red chromaticity
        assert x > 0.65 and 0.28 < y < 0.36


class TestPlanckianAndCct:
    def test_unit_peak(self):
        assert ph.planckian_spd(3000.0).values.max() == pytest.approx(1.0)

    def test_wien_shift(self):
        peaks = [ph.GRID[np.argmax(ph.planckian_spd(t).values)] for t in (2000, 4000, 8000)]
        assert peaks[0] > peaks[1] > peaks[2]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            ph.planckian_spd(500.0)

    def test_illuminant_a_chromaticity(self):
        x, y = ph.chromaticity(ph.tristimulus(ph.planckian_spd(2856.0)))
        assert x == pytest.approx(0.4476, abs=0.002)
        assert y == pytest.approx(0.4074, abs=0.002)

    @pytest.mark.parametrize("t", [2500.0, 2856.0, 3000.0, 3500.0, 4000.0, 5000.0])
    def test_round_trip(self, t):
        result = ph.cct(ph.planckian_spd(t))
        assert abs(result.kelvin - t) / t < 0.005
        assert result.duv < 1e-4

    def test_far_from_locus_rejected(self):
        with pytest.raises(NoMeaningfulCctError):
            ph.cct(monochromatic(520))


class TestCri:
    def test_planckian_is_perfect(self):
        report = ph.cri(ph.planckian_spd(3500.0))
        assert report.general == pytest.approx(100.0, abs=0.5)
        assert np.all(np.abs(report.special_indices - 100.0) < 0.5)

    def test_general_is_mean_of_first_eight(self):
        report = ph.cri(ph.white_mix_spd())
        assert report.general == pytest.approx(report.special_indices[:8].mean(), abs=1e-12)

    def test_single_channel_has_no_meaningful_cct(self):
        with pytest.raises(NoMeaningfulCctError):
            ph.cri(ph.h_model_spd(ph.LED_CHANNELS["blue"]))

    def test_narrow_band_mix_renders_poorly(self):
        report = ph.cri(ph.combined_led_spd({"amber": 3.6, "blue": 1.0}))
        assert report.general < 50.0

    def test_white_mix_matches_device_point(self):
        spd = ph.white_mix_spd(100.0)
        result = ph.cct(spd)
        report = ph.cri(spd)
        assert 3350 <= result.kelvin <= 3650
        assert result.duv < 1e-3
        assert 77 <= report.general <= 83


class TestDataTables:
    def test_cmf_shape_and_peak(self):
        cmf = ph.load_cmf()
        assert cmf.shape == (401, 3)
        assert ph.GRID[np.argmax(cmf[:, 1])] == 555.0
        assert cmf[:, 1].max() == pytest.approx(1.0)

    def test_tcs_shape_and_range(self):
        tcs = ph.load_tcs()
        assert tcs.shape == (401, 14)
        assert np.all(tcs > 0) and np.all(tcs < 1)

    def test_data_dir_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("VLCSIM_DATA_DIR", str(tmp_path))
        (tmp_path / "cie_cmf_1931.csv").write_text("wavelength_nm,xbar,ybar,zbar\n380,0,0,0\n")
        with pytest.raises(ValueError):
            ph.load_cmf()
        monkeypatch.delenv("VLCSIM_DATA_DIR")
        assert ph.load_cmf().shape == (401, 3)
