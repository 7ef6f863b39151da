"""Core signal types and numeric utilities shared by the whole link simulator."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import signal as sps
from scipy.fft import next_fast_len

from . import kernels


class SigError(ValueError):
    """Raised on contract violations in the signal layer."""


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class Alphabet:
    """PAM-M level set.  Levels are 2i - (M-1) for index i, so spacing is 2."""

    order: int

    def __post_init__(self):
        if self.order not in (4, 6):
            raise SigError(f"unsupported PAM order {self.order}")

    @property
    def levels(self) -> np.ndarray:
        return 2.0 * np.arange(self.order) - (self.order - 1)

    @property
    def bits_per_2symbols(self) -> int:
        return 4 if self.order == 4 else 5

    @property
    def bits_per_symbol(self) -> float:
        return self.bits_per_2symbols / 2.0

    def level(self, i) -> np.ndarray:
        return 2.0 * np.asarray(i) - (self.order - 1)


@dataclass(frozen=True)
class SymbolSeq:
    alphabet: Alphabet
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.alphabet.order):
            raise SigError("symbol index out of range")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def levels(self) -> np.ndarray:
        return self.alphabet.level(self.indices)


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled real signal."""

    sample_rate: float
    samples: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise SigError("sample_rate must be positive")
        s = np.asarray(self.samples, dtype=np.float64)
        if s.size and not np.all(np.isfinite(s)):
            raise SigError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return len(self.samples)

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(self.sample_rate, samples, self.t0)


@dataclass(frozen=True)
class FirFilter:
    """FIR taps with an explicit zero-delay tap index (anti-causal taps allowed)."""

    taps: np.ndarray
    center: int = 0

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=np.float64)
        if not (0 <= self.center < len(t)):
            raise SigError("center index outside tap range")
        object.__setattr__(self, "taps", t)


# ---------------------------------------------------------------------------
# operations

_PRBS_TAPS = {7: 6, 15: 14, 31: 28}


def prbs_bits(degree: int, seed: int, n: int) -> np.ndarray:
    """Maximal-length LFSR bits for x^degree + x^k + 1 (standard PRBS taps)."""
    if degree not in _PRBS_TAPS:
        raise SigError(f"degree must be one of {sorted(_PRBS_TAPS)}")
    state = seed & ((1 << degree) - 1)
    if state == 0:
        raise SigError("seed must be nonzero modulo 2^degree")
    init = np.array([(state >> i) & 1 for i in range(degree)], dtype=np.uint8)
    # Fibonacci recurrence: a[k] = a[k-d] ^ a[k-degree], d = degree - tap
    d = degree - _PRBS_TAPS[degree]
    return kernels.prbs_fill(init, d, degree, n)


def fir_apply(x, f: FirFilter):
    """Linear convolution, zero-padded edges, output[k] = sum_j taps[j]*x[k+center-j]."""
    wav = isinstance(x, Waveform)
    data = x.samples if wav else np.asarray(x, dtype=np.float64)
    if data.size == 0:
        raise SigError("empty input")
    full = np.convolve(data, f.taps)
    out = full[f.center:f.center + len(data)]
    return x.with_samples(out) if wav else out


def resample(w: Waveform, new_rate: float) -> Waveform:
    """Band-limited polyphase resampling to new_rate."""
    if new_rate <= 0:
        raise SigError("new_rate must be positive")
    if len(w) == 0:
        raise SigError("empty input")
    if new_rate == w.sample_rate:
        return w
    frac = Fraction(new_rate / w.sample_rate).limit_denominator(1 << 16)
    out = sps.resample_poly(w.samples, frac.numerator, frac.denominator, padtype="line")
    return Waveform(new_rate, out, w.t0)


def freq_response(f, at, sample_rate: float) -> np.ndarray:
    """Evaluate H(f) of a FirFilter (or a cascade of them) at given frequencies."""
    freqs = np.asarray(at, dtype=np.float64)
    if np.any(freqs >= sample_rate / 2):
        raise SigError("frequency at or above Nyquist")
    filters = [f] if isinstance(f, FirFilter) else list(f)
    h = np.ones_like(freqs, dtype=np.complex128)
    for filt in filters:
        j = np.arange(len(filt.taps))
        ph = np.exp(-2j * np.pi * np.outer(freqs, j - filt.center) / sample_rate)
        h *= ph @ filt.taps
    return h


def fractional_delay_fir(delay: float, length: int = 9) -> FirFilter:
    """Windowed-sinc fractional-delay interpolator; delay in samples."""
    if length % 2 == 0:
        raise SigError("interpolator length must be odd")
    c = (length - 1) // 2
    n = np.arange(length)
    taps = np.sinc(n - c - delay) * np.hamming(length)
    taps /= taps.sum()
    return FirFilter(taps, center=c)


def shift_waveform(w: Waveform, delay_s: float) -> Waveform:
    """Exact fractional time shift via FFT phase ramp (periodic-safe padding)."""
    n = len(w)
    pad = int(abs(delay_s) * w.sample_rate) + 64
    m = next_fast_len(n + 2 * pad)
    x = np.zeros(m)
    x[:n] = w.samples
    spec = np.fft.rfft(x)
    fr = np.fft.rfftfreq(m, d=1.0 / w.sample_rate)
    spec *= np.exp(-2j * np.pi * fr * delay_s)
    return w.with_samples(np.fft.irfft(spec, m)[:n])


def measure_tone(w: Waveform, freq: float) -> tuple[float, float]:
    """Least-squares amplitude and phase of a sinusoid at a known frequency."""
    t = np.arange(len(w)) / w.sample_rate
    a = np.column_stack([np.cos(2 * np.pi * freq * t), np.sin(2 * np.pi * freq * t)])
    c, s = np.linalg.lstsq(a, w.samples, rcond=None)[0]
    return float(np.hypot(c, s)), float(np.arctan2(-s, c))
