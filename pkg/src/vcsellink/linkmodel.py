"""Synthetic analog channel: DAC/driver/VCSEL/fiber/detector/ADC models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps
from scipy.fft import next_fast_len
from scipy.optimize import brentq

from .sigcore import SigError, Waveform

MW = 1.0  # optical power unit used throughout: milliwatt


# ---------------------------------------------------------------------------
# analytic stage responses

_BESSEL_BA = sps.bessel(4, 1.0, "low", analog=True, norm="mag")


def _bessel4(f: np.ndarray, f3db: float) -> np.ndarray:
    """4th-order Bessel low-pass, unity DC gain, 3 dB point at f3db."""
    if not np.isfinite(f3db):
        return np.ones_like(f, dtype=np.complex128)
    s = 1j * np.asarray(f) / f3db
    b, a = _BESSEL_BA
    return np.polyval(b, s) / np.polyval(a, s)


def _bessel4_mag(u: float) -> float:
    return float(np.abs(_bessel4(np.array([u]), 1.0))[0])


# u where the normalized Bessel-4 magnitude is -6 dB (used for the DAC spec)
_BESSEL_U6 = brentq(lambda u: _bessel4_mag(u) - 10 ** (-6 / 20), 0.5, 5.0)


def _second_order_fn(f3db: float, zeta: float) -> float:
    """Natural frequency of a 2nd-order low-pass whose |H| crosses -3 dB at f3db."""
    v = ((2 - 4 * zeta ** 2) + np.sqrt((4 * zeta ** 2 - 2) ** 2 + 4)) / 2
    return f3db / np.sqrt(v)


def _second_order(f: np.ndarray, fn: float, zeta: float) -> np.ndarray:
    u = np.asarray(f) / fn
    return 1.0 / (1.0 - u ** 2 + 2j * zeta * u)


@dataclass(frozen=True)
class ComponentBandwidths:
    dac_6db_hz: float = 50e9
    driver_3db_hz: float = 70e9
    vcsel_3db_hz: float = 35e9
    target_e2e_3db_hz: float = 28e9
    vcsel_damping: float = 0.5
    # Steep supra-Gaussian excess loss of the discrete RF chain (connectors,
    # packaging) above its passband; |A(f)| = 2^(-(f/f3)^order / 2).
    interconnect_3db_hz: float = 36.5e9
    interconnect_order: float = 8.0

    def electrical_response(self, f: np.ndarray) -> np.ndarray:
        """DAC + driver + interconnect: everything between TX DSP and the laser."""
        h = _bessel4(f, self.dac_6db_hz / _BESSEL_U6)
        h = h * _bessel4(f, self.driver_3db_hz)
        if np.isfinite(self.interconnect_3db_hz):
            u = np.asarray(f) / self.interconnect_3db_hz
            h = h * np.exp2(-np.abs(u) ** self.interconnect_order / 2.0)
        return h

    def fixed_response(self, f: np.ndarray) -> np.ndarray:
        """Cascade of all stages except the receiver filter."""
        h = self.electrical_response(f)
        if np.isfinite(self.vcsel_3db_hz):
            fn = _second_order_fn(self.vcsel_3db_hz, self.vcsel_damping)
            h = h * _second_order(f, fn, self.vcsel_damping)
        return h

    def cascade_response(self, f: np.ndarray, rx_3db_hz: float) -> np.ndarray:
        return self.fixed_response(f) * _bessel4(f, rx_3db_hz)


def calibrate_rx_bw(cb: ComponentBandwidths) -> float:
    """Solve the receiver 3 dB point so the full cascade crosses -3 dB at the target."""
    t = cb.target_e2e_3db_hz
    fixed = float(np.abs(cb.fixed_response(np.array([t])))[0])
    req = (1 / np.sqrt(2)) / fixed
    if req >= 1.0:
        raise SigError(
            f"e2e target {t / 1e9:.1f} GHz unreachable: fixed stages already "
            f"{-20 * np.log10(fixed):.2f} dB down")
    u = brentq(lambda x: _bessel4_mag(x) - req, 1e-6, 20.0)
    return t / u


def apply_response(w: Waveform, h_of_f) -> Waveform:
    """Filter a waveform by an analytic frequency response (zero-padded FFT)."""
    n = len(w)
    m = next_fast_len(n + 8192)
    x = np.zeros(m)
    x[:n] = w.samples
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(m, d=1.0 / w.sample_rate)
    spec *= h_of_f(f)
    return w.with_samples(np.fft.irfft(spec, m)[:n])


# ---------------------------------------------------------------------------
# VCSEL

@dataclass(frozen=True)
class VcselModel:
    bias: float = 1.0                 # drive current above threshold, arb. units
    threshold: float = 0.0
    c1: float = 1.0                   # L-I polynomial about threshold
    c2: float = -0.03
    c3: float = -0.002
    f3db_hz: float = 35e9
    damping: float = 0.5
    modulation_index: float = 0.8     # peak drive swing / (bias - threshold)
    rin_db_per_hz: float = -150.0
    rin_peak_hz: float = 28e9
    rin_damping: float = 0.6

    def li(self, current: np.ndarray) -> np.ndarray:
        d = current - self.threshold
        return np.maximum(self.c1 * d + self.c2 * d ** 2 + self.c3 * d ** 3, 0.0)

    def rin_shape(self, f: np.ndarray) -> np.ndarray:
        """Power spectral shape of the RIN, 1 in the low-frequency flat region."""
        fn = _second_order_fn(self.rin_peak_hz, self.rin_damping)
        return np.abs(_second_order(f, fn, self.rin_damping)) ** 2


def vcsel_transfer(drive: Waveform, m: VcselModel, seed) -> Waveform:
    """Static L-I nonlinearity + resonant low-pass + multiplicative RIN."""
    peak = np.max(np.abs(drive.samples))
    scale = m.modulation_index * (m.bias - m.threshold) / peak if peak else 0.0
    current = m.bias + scale * drive.samples
    if np.mean(current < m.threshold) > 0.5:
        raise SigError("drive swings below laser threshold for most samples")
    p = m.li(current)
    fn = _second_order_fn(m.f3db_hz, m.damping)
    clean = apply_response(Waveform(drive.sample_rate, p, drive.t0),
                           lambda f: _second_order(f, fn, m.damping))
    rin_lin = 10 ** (m.rin_db_per_hz / 10)
    if rin_lin > 0:
        rng = np.random.default_rng(seed)
        nyq = drive.sample_rate / 2
        fgrid = np.linspace(0, nyq, 512)
        integral = rin_lin * np.trapezoid(m.rin_shape(fgrid), fgrid)
        white = rng.standard_normal(len(clean))
        spec = np.fft.rfft(white)
        f = np.fft.rfftfreq(len(clean), d=1.0 / drive.sample_rate)
        shape = np.sqrt(m.rin_shape(f))
        spec *= shape
        shaped = np.fft.irfft(spec, len(clean))
        shaped /= np.sqrt(np.mean(shape[1:] ** 2))    # unit variance after shaping
        noise = np.maximum(clean.samples, 0.0) * np.sqrt(integral) * shaped
        out = clean.samples + noise
    else:
        out = clean.samples
    return clean.with_samples(np.maximum(out, 0.0))


# ---------------------------------------------------------------------------
# fiber

@dataclass(frozen=True)
class FiberModel:
    length_m: float = 0.0
    emb_mhz_km: float = 4700.0        # OM4 effective modal bandwidth
    dispersion_ps_nm_km: float = -90.0
    source_rms_nm: float = 0.178
    attenuation_db_km: float = 2.2

    def sigma_s(self) -> float:
        """RMS width of the combined Gaussian impulse response, seconds."""
        if self.length_m == 0:
            return 0.0
        f3_modal = self.emb_mhz_km * 1e6 / (self.length_m / 1e3)
        sigma_modal = np.sqrt(np.log(2)) / (2 * np.pi * f3_modal)
        sigma_chrom = (abs(self.dispersion_ps_nm_km) * 1e-12
                       * self.source_rms_nm * self.length_m / 1e3)
        return float(np.hypot(sigma_modal, sigma_chrom))


def fiber_transfer(p: Waveform, fm: FiberModel) -> Waveform:
    if fm.length_m < 0:
        raise SigError("fiber length must be >= 0")
    if fm.length_m == 0:
        return p
    sig = fm.sigma_s()
    atten = 10 ** (-fm.attenuation_db_km * fm.length_m / 1e3 / 10)
    out = apply_response(p, lambda f: np.exp(-0.5 * (2 * np.pi * f * sig) ** 2))
    return out.with_samples(np.maximum(out.samples * atten, 0.0))


# ---------------------------------------------------------------------------
# detection + ADC

@dataclass(frozen=True)
class AdcModel:
    sps_out: int = 2
    resolution_bits: int = 8
    timing_offset_ui: float = 0.0
    rms_jitter_ui: float = 0.0
    # Thermal noise level: RMS relative to a 1 mW carrier, measured in the
    # reference bandwidth below.  The underlying PSD is flat, so the per-sample
    # variance scales with the simulation rate.
    snr_db: float = 38.0
    ref_bw_hz: float = 100e9

    def __post_init__(self):
        if self.resolution_bits and self.resolution_bits < 4:
            raise SigError("ADC resolution below 4 bits")
        if abs(self.timing_offset_ui) > 0.5:
            raise SigError("|timing offset| above 0.5 UI")


def detect_and_digitize(p: Waveform, adc: AdcModel, seed, rx_3db_hz: float,
                        baud: float) -> Waveform:
    """Receiver filter, thermal noise, timing offset/jitter, resampling, quantizer."""
    w = apply_response(p, lambda f: _bessel4(f, rx_3db_hz))
    rng = np.random.default_rng(seed)
    if np.isfinite(adc.snr_db):
        sigma = MW * 10 ** (-adc.snr_db / 20)
        sigma *= np.sqrt(w.sample_rate / adc.ref_bw_hz)
        w = w.with_samples(w.samples + sigma * rng.standard_normal(len(w)))
    out_rate = baud * adc.sps_out
    ui = 1.0 / baud
    n_out = int(len(w) * out_rate / w.sample_rate)
    if adc.timing_offset_ui == 0 and adc.rms_jitter_ui == 0:
        from .sigcore import resample

        w = resample(w, out_rate)
        samples = w.samples
    else:
        t_in = np.arange(len(w)) / w.sample_rate
        t_out = np.arange(n_out) / out_rate + adc.timing_offset_ui * ui
        if adc.rms_jitter_ui:
            t_out = t_out + adc.rms_jitter_ui * ui * rng.standard_normal(n_out)
        samples = np.interp(t_out, t_in, w.samples)
    if adc.resolution_bits:
        lo, hi = samples.min(), samples.max()
        if hi > lo:
            lsb = (hi - lo) / (2 ** adc.resolution_bits - 1)
            samples = lo + np.round((samples - lo) / lsb) * lsb
    return Waveform(out_rate, samples, p.t0)


# ---------------------------------------------------------------------------
# OMA control

def _kmeans_1d(x: np.ndarray, k: int, iters: int = 25) -> np.ndarray:
    centers = np.quantile(x, (np.arange(k) + 0.5) / k)
    for _ in range(iters):
        idx = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        for c in range(k):
            sel = idx == c
            if sel.any():
                centers[c] = x[sel].mean()
    return np.sort(centers)


def set_oma(p: Waveform, target_oma_dbm: float, baud: float | None = None,
            order: int = 4) -> Waveform:
    """Scale optical power so P_high - P_low equals the target OMA."""
    x = p.samples
    if baud is not None:
        sps_f = p.sample_rate / baud
        centers = (np.arange(int(len(x) / sps_f)) * sps_f + sps_f / 2).astype(int)
        x = x[centers[centers < len(x)]]
    if np.ptp(x) == 0:
        raise SigError("cannot set OMA of a constant signal")
    levels = _kmeans_1d(x, order)
    oma_now = levels[-1] - levels[0]
    target_mw = 10 ** (target_oma_dbm / 10)
    return p.with_samples(p.samples * (target_mw / oma_now))
