"""Analog channel models: cascade calibration, VCSEL, fiber, ADC, OMA."""
import numpy as np
import pytest

from vcsellink.linkmodel import (
    AdcModel,
    ComponentBandwidths,
    FiberModel,
    VcselModel,
    apply_response,
    calibrate_rx_bw,
    detect_and_digitize,
    fiber_transfer,
    set_oma,
    vcsel_transfer,
)
from vcsellink.sigcore import SigError, Waveform, measure_tone

INF = float("inf")


def _ideal_bw(**kw):
    base = dict(dac_6db_hz=INF, driver_3db_hz=INF, vcsel_3db_hz=INF,
                interconnect_3db_hz=INF, target_e2e_3db_hz=28e9)
    base.update(kw)
    return ComponentBandwidths(**base)


def _e2e_3db(cb, rx):
    f = np.linspace(1e8, 60e9, 30000)
    h = np.abs(cb.cascade_response(f, rx))
    return f[np.argmin(np.abs(20 * np.log10(h) + 20 * np.log10(np.sqrt(2))))]


class TestCalibration:
    def test_ideal_fixed_stages(self):
        cb = _ideal_bw()
        assert calibrate_rx_bw(cb) == pytest.approx(28e9, rel=1e-3)

    def test_default_round_trip(self):
        cb = ComponentBandwidths()
        rx = calibrate_rx_bw(cb)
        assert abs(_e2e_3db(cb, rx) - 28e9) < 0.1e9

    def test_unreachable_target(self):
        with pytest.raises(SigError):
            calibrate_rx_bw(ComponentBandwidths(vcsel_3db_hz=35e9, target_e2e_3db_hz=40e9))

    def test_electrical_response_excludes_vcsel(self):
        # above resonance the laser stage attenuates, so the full fixed
        # cascade must sit below the electrical-only cascade there
        cb = ComponentBandwidths()
        f = np.array([40e9])
        assert np.abs(cb.fixed_response(f)[0]) < np.abs(cb.electrical_response(f)[0])

    def test_apply_response_identity(self, rng):
        w = Waveform(100e9, rng.normal(size=1000))
        out = apply_response(w, lambda f: np.ones_like(f, dtype=complex))
        assert np.allclose(out.samples, w.samples, atol=1e-10)


class TestVcsel:
    def test_linear_path_degenerates(self, rng):
        m = VcselModel(c2=0.0, c3=0.0, f3db_hz=INF, rin_db_per_hz=-np.inf)
        drive = Waveform(100e9, 0.5 * np.sin(np.linspace(0, 20 * np.pi, 4096)))
        out = vcsel_transfer(drive, m, 1)
        scale = m.modulation_index * (m.bias - m.threshold) / np.max(np.abs(drive.samples))
        assert np.allclose(out.samples, m.bias + scale * drive.samples, atol=1e-9)

    def test_dc_rin_ratio(self):
        m = VcselModel(c2=0.0, c3=0.0, f3db_hz=INF, rin_db_per_hz=-140.0)
        rate = 200e9
        drive = Waveform(rate, np.full(2_000_000, 1.0))
        out = vcsel_transfer(drive, m, 99)
        rin_lin = 10 ** (m.rin_db_per_hz / 10)
        fg = np.linspace(0, rate / 2, 512)
        expect = np.sqrt(rin_lin * np.trapezoid(m.rin_shape(fg), fg))
        got = out.samples.std() / out.samples.mean()
        assert abs(got - expect) < 0.05 * expect

    def test_rin_scales_with_power(self):
        # noise std / mean constant across power -> variance goes with P^2
        rate = 200e9
        stds = []
        for bias in (1.0, 2.0):
            m = VcselModel(bias=bias, c2=0.0, c3=0.0, f3db_hz=INF, rin_db_per_hz=-140.0)
            out = vcsel_transfer(Waveform(rate, np.full(500_000, 1.0)), m, 7)
            stds.append(out.samples.std() / out.samples.mean())
        assert abs(stds[0] - stds[1]) < 0.1 * stds[0]

    def test_two_tone_second_harmonic(self):
        rate = 400e9
        f1 = 5e9
        m = VcselModel(c2=-0.03, c3=0.0, f3db_hz=INF, rin_db_per_hz=-np.inf,
                       modulation_index=0.5)
        # 80000 samples -> 5 MHz bins, so all tones land on integer cycles
        t = np.arange(80000) / rate
        drive = Waveform(rate, np.cos(2 * np.pi * f1 * t) + np.cos(2 * np.pi * 7e9 * t))
        out = vcsel_transfer(drive, m, 0)
        s = m.modulation_index * (m.bias - m.threshold) / 2.0  # per-tone amplitude
        a2, _ = measure_tone(out, 2 * f1)            # second harmonic of f1
        aim, _ = measure_tone(out, 12e9)             # f1 + f2 intermodulation
        assert abs(20 * np.log10(a2 / (abs(m.c2) * s * s / 2))) < 1.0
        assert abs(20 * np.log10(aim / (abs(m.c2) * s * s))) < 1.0

    def test_below_threshold_rejected(self):
        m = VcselModel(bias=0.1, threshold=0.5)
        with pytest.raises(SigError):
            vcsel_transfer(Waveform(100e9, np.ones(100)), m, 0)

    def test_output_nonnegative(self, rng):
        m = VcselModel(rin_db_per_hz=-110.0)
        out = vcsel_transfer(Waveform(400e9, rng.normal(size=10000)), m, 3)
        assert np.all(out.samples >= 0)


class TestFiber:
    def test_zero_length_identity(self, rng):
        w = Waveform(100e9, np.abs(rng.normal(size=100)))
        assert fiber_transfer(w, FiberModel(length_m=0)) is w

    def test_chromatic_sigma_60m(self):
        fm = FiberModel(length_m=60)
        sigma_chrom = 90e-12 * 0.178 * 0.060
        assert sigma_chrom == pytest.approx(0.96e-12, rel=0.01)
        assert fm.sigma_s() > sigma_chrom  # modal term adds in quadrature

    def test_longer_is_narrower(self):
        t = np.arange(4096) / 200e9
        tone = Waveform(200e9, 1.0 + 0.5 * np.cos(2 * np.pi * 20e9 * t))
        a60, _ = measure_tone(fiber_transfer(tone, FiberModel(length_m=60)), 20e9)
        a100, _ = measure_tone(fiber_transfer(tone, FiberModel(length_m=100)), 20e9)
        assert a100 < a60

    def test_attenuation(self):
        w = Waveform(100e9, np.full(1000, 2.0))
        out = fiber_transfer(w, FiberModel(length_m=1000))
        assert out.samples[500] == pytest.approx(2.0 * 10 ** (-2.2 / 10), rel=1e-3)

    def test_negative_length_rejected(self):
        with pytest.raises(SigError):
            fiber_transfer(Waveform(1.0, np.ones(4)), FiberModel(length_m=-1))


class TestAdc:
    def test_pure_filter_resample(self):
        adc = AdcModel(snr_db=INF, resolution_bits=0, sps_out=2)
        t = np.arange(8192) / 400e9
        w = Waveform(400e9, 1.0 + 0.3 * np.sin(2 * np.pi * 10e9 * t))
        out = detect_and_digitize(w, adc, 0, rx_3db_hz=INF, baud=100e9)
        assert out.sample_rate == pytest.approx(200e9)
        amp, _ = measure_tone(Waveform(out.sample_rate, out.samples[100:-100]), 10e9)
        assert abs(amp - 0.3) < 0.01

    def test_quantizer_half_lsb(self):
        # output rate equals input rate, so no resampling happens and the
        # quantizer error is directly visible
        adc = AdcModel(snr_db=INF, resolution_bits=8, sps_out=2)
        ramp = np.linspace(0.0, 1.0, 8192)
        out = detect_and_digitize(Waveform(200e9, ramp), adc, 0,
                                  rx_3db_hz=INF, baud=100e9)
        assert len(out) == len(ramp)
        lsb = 1.0 / 255
        assert np.max(np.abs(out.samples - ramp)) <= lsb / 2 + 1e-12

    def test_dc_noise_variance_matches_snr(self):
        # at a 100 GS/s capture the configured SNR applies directly
        adc = AdcModel(snr_db=20.0, resolution_bits=0, sps_out=2, ref_bw_hz=100e9)
        w = Waveform(100e9, np.full(2_000_000, 3.0))
        out = detect_and_digitize(w, adc, 5, rx_3db_hz=INF, baud=50e9)
        sigma = 10 ** (-20 / 20)
        assert abs(out.samples.var() - sigma**2) < 0.05 * sigma**2

    def test_offset_range_checked(self):
        with pytest.raises(SigError):
            AdcModel(timing_offset_ui=0.6)

    def test_resolution_checked(self):
        with pytest.raises(SigError):
            AdcModel(resolution_bits=2)


class TestOma:
    def _pam4_wave(self, rng, scale=0.7, n=4000, sps=4):
        idx = rng.integers(0, 4, n)
        levels = np.array([0.1, 0.4, 0.7, 1.0]) * scale
        return Waveform(sps * 1.0, np.repeat(levels[idx], sps))

    def test_target_zero_dbm(self, rng):
        w = self._pam4_wave(rng)
        out = set_oma(w, 0.0, baud=1.0, order=4)
        lo = np.sort(out.samples)[: len(out) // 8].mean()
        hi = np.sort(out.samples)[-len(out) // 8:].mean()
        assert abs((hi - lo) - 1.0) < 0.005

    def test_target_one_dbm(self, rng):
        w = self._pam4_wave(rng)
        out = set_oma(w, 1.0, baud=1.0, order=4)
        lo = np.sort(out.samples)[: len(out) // 8].mean()
        hi = np.sort(out.samples)[-len(out) // 8:].mean()
        assert abs((hi - lo) - 10 ** 0.1) < 0.005 * 10 ** 0.1

    def test_idempotent(self, rng):
        w = self._pam4_wave(rng)
        once = set_oma(w, 0.5, baud=1.0, order=4)
        twice = set_oma(once, 0.5, baud=1.0, order=4)
        assert np.allclose(once.samples, twice.samples, rtol=1e-6)

    def test_constant_rejected(self):
        with pytest.raises(SigError):
            set_oma(Waveform(1.0, np.ones(100)), 0.0)


class TestDeterminism:
    def test_same_seed_same_noise(self, rng):
        m = VcselModel(rin_db_per_hz=-140.0)
        drive = Waveform(400e9, rng.normal(size=4096))
        a = vcsel_transfer(drive, m, 42)
        b = vcsel_transfer(drive, m, 42)
        assert np.array_equal(a.samples, b.samples)

    def test_different_seed_differs(self, rng):
        m = VcselModel(rin_db_per_hz=-140.0)
        drive = Waveform(400e9, rng.normal(size=4096))
        assert not np.array_equal(vcsel_transfer(drive, m, 1).samples,
                                  vcsel_transfer(drive, m, 2).samples)
