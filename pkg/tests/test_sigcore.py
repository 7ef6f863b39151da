"""Core signal types and numeric utilities."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcsellink.sigcore import (
    Alphabet,
    FirFilter,
    SigError,
    SymbolSeq,
    Waveform,
    fir_apply,
    fractional_delay_fir,
    freq_response,
    measure_tone,
    prbs_bits,
    resample,
    shift_waveform,
)


class TestAlphabet:
    def test_levels_pam4(self):
        assert np.array_equal(Alphabet(4).levels, [-3, -1, 1, 3])

    def test_levels_pam6(self):
        assert np.array_equal(Alphabet(6).levels, [-5, -3, -1, 1, 3, 5])

    def test_bits_per_symbol(self):
        assert Alphabet(4).bits_per_symbol == 2.0
        assert Alphabet(6).bits_per_symbol == 2.5

    def test_rejects_other_orders(self):
        with pytest.raises(SigError):
            Alphabet(8)

    def test_symbolseq_range_check(self):
        with pytest.raises(SigError):
            SymbolSeq(Alphabet(4), np.array([0, 4]))


class TestWaveform:
    def test_rejects_nonfinite(self):
        with pytest.raises(SigError):
            Waveform(1.0, np.array([1.0, np.nan]))

    def test_rejects_bad_rate(self):
        with pytest.raises(SigError):
            Waveform(0.0, np.zeros(4))


class TestPrbs:
    def test_period_127_balance(self):
        bits = prbs_bits(7, 0x7F, 127)
        assert bits.sum() == 64  # maximal-length balance: 64 ones, 63 zeros

    def test_periodicity(self):
        bits = prbs_bits(7, 5, 254)
        assert np.array_equal(bits[:127], bits[127:])

    def test_zero_seed_rejected(self):
        with pytest.raises(SigError):
            prbs_bits(7, 0, 10)

    def test_bad_degree_rejected(self):
        with pytest.raises(SigError):
            prbs_bits(9, 1, 10)

    def test_prbs31_autocorrelation_near_zero(self):
        n = 1_000_000
        x = 2.0 * prbs_bits(31, 1, n) - 1.0
        for lag in (1, 7, 100):
            r = float(x[:-lag] @ x[lag:]) / (n - lag)
            # a windowed m-sequence segment is not iid, but any visible
            # correlation structure would sit far above this bound
            assert abs(r) < 0.02

    def test_short_request(self):
        assert len(prbs_bits(15, 1, 4)) == 4


class TestFirApply:
    def test_identity(self, rng):
        x = rng.normal(size=100)
        assert np.array_equal(fir_apply(x, FirFilter([1.0], 0)), x)

    def test_one_plus_d(self):
        out = fir_apply(np.array([1.0, 0.0, 0.0]), FirFilter([1.0, 1.0], 0))
        assert np.array_equal(out, [1.0, 1.0, 0.0])

    def test_impulse_response_with_center(self):
        imp = np.zeros(7)
        imp[3] = 1.0
        taps = np.array([-0.2, 1.4, -0.2])
        out = fir_apply(imp, FirFilter(taps, 1))
        assert np.allclose(out[2:5], taps)

    def test_waveform_passthrough(self, rng):
        w = Waveform(2.0, rng.normal(size=32))
        out = fir_apply(w, FirFilter([0.5], 0))
        assert isinstance(out, Waveform) and out.sample_rate == 2.0

    def test_empty_rejected(self):
        with pytest.raises(SigError):
            fir_apply(np.empty(0), FirFilter([1.0], 0))

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**16))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, a, b, seed):
        r = np.random.default_rng(seed)
        x, y = r.normal(size=50), r.normal(size=50)
        f = FirFilter(r.normal(size=5), 2)
        lhs = fir_apply(a * x + b * y, f)
        rhs = a * fir_apply(x, f) + b * fir_apply(y, f)
        assert np.allclose(lhs, rhs, atol=1e-9)


class TestResample:
    def test_same_rate_identity(self, rng):
        w = Waveform(8.0, rng.normal(size=64))
        assert resample(w, 8.0) is w

    def test_dc_upsample(self):
        w = Waveform(1.0, np.full(100, 2.5))
        out = resample(w, 2.0)
        # polyphase filter passband ripple limits DC flatness to ~0.1%
        assert np.allclose(out.samples, 2.5, atol=5e-3)

    def test_sine_amplitude_preserved(self):
        rate, f0 = 256e9, 10e9
        t = np.arange(4096) / rate
        w = Waveform(rate, np.sin(2 * np.pi * f0 * t))
        out = resample(w, 128e9)
        amp, _ = measure_tone(Waveform(128e9, out.samples[100:-100]), f0)
        assert abs(amp - 1.0) < 0.01

    def test_round_trip_rms(self, rng):
        # band-limit the input well below Nyquist first
        x = fir_apply(rng.normal(size=2048), FirFilter(np.hanning(33) / np.hanning(33).sum(), 16))
        w = Waveform(1.0, x)
        back = resample(resample(w, 2.0), 1.0)
        err = back.samples[32:-32] - x[32:-32]
        assert np.sqrt(np.mean(err**2)) < 0.01 * np.std(x)


class TestFreqResponse:
    def test_identity(self):
        h = freq_response(FirFilter([1.0], 0), [0.1, 0.2, 0.3], 1.0)
        assert np.allclose(h, 1.0)

    def test_one_plus_d_magnitude(self):
        f = np.linspace(0, 0.49, 20)
        h = freq_response(FirFilter([1.0, 1.0], 0), f, 1.0)
        assert np.allclose(np.abs(h), 2 * np.abs(np.cos(np.pi * f)), atol=1e-12)

    def test_cascade_multiplies(self, rng):
        f1 = FirFilter(rng.normal(size=4), 1)
        f2 = FirFilter(rng.normal(size=3), 0)
        at = [0.05, 0.21]
        h = freq_response([f1, f2], at, 1.0)
        assert np.allclose(h, freq_response(f1, at, 1.0) * freq_response(f2, at, 1.0))

    def test_gaussian_design_round_trip(self):
        # FIR sampled from a Gaussian with 3 dB point at 35 GHz, measured back
        rate, f3 = 400e9, 35e9
        sigma_t = np.sqrt(np.log(2)) / (2 * np.pi * f3)
        t = (np.arange(257) - 128) / rate
        taps = np.exp(-0.5 * (t / sigma_t) ** 2)
        taps /= taps.sum()
        h = freq_response(FirFilter(taps, 128), [f3], rate)
        assert abs(np.abs(h[0]) ** 2 - 0.5) < 0.01 * 0.5

    def test_nyquist_rejected(self):
        with pytest.raises(SigError):
            freq_response(FirFilter([1.0], 0), [0.5], 1.0)


class TestDelays:
    def test_fractional_delay_peak(self):
        f = fractional_delay_fir(0.3, 9)
        assert len(f.taps) == 9 and abs(f.taps.sum() - 1.0) < 1e-12

    def test_even_length_rejected(self):
        with pytest.raises(SigError):
            fractional_delay_fir(0.1, 8)

    def test_shift_waveform_tone_phase(self):
        rate, f0 = 64.0, 3.0
        t = np.arange(512) / rate
        w = Waveform(rate, np.cos(2 * np.pi * f0 * t))
        d = 0.17
        out = shift_waveform(w, d)
        ref = np.cos(2 * np.pi * f0 * (t[64:-64] - d))
        # edge discontinuities of the padded FFT window ring at the 1e-3 level
        assert np.allclose(out.samples[64:-64], ref, atol=5e-3)
