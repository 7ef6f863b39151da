"""Evaluation layer: BER with Wilson CI, KP4 verdict, hard-decision AIR,
error-burst statistics, eye histograms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sigcore import SigError, Waveform

KP4_THRESHOLD = 2.2e-4
KP4_RATE = 514.0 / 544.0
MIN_RELIABLE_ERRORS = 100


@dataclass
class MetricsReport:
    gross_gbps: float
    pre_fec_ber: float
    ber_ci: tuple
    ber_reliable: bool
    ser: float
    kp4_pass: bool
    net_gbps_kp4: float
    air_gbps: float
    burst_hist: dict
    max_burst: int
    symbols_counted: int
    bit_errors: int
    symbol_errors: int
    bits_counted: int
    diagnostics: dict = field(default_factory=dict)


def wilson_ci(errors: int, n: int, z: float = 1.959963984540054) -> tuple:
    if n == 0:
        return (0.0, 1.0)
    p = errors / n
    den = 1 + z * z / n
    center = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, center - half), min(1.0, center + half))


def ber(tx_bits: np.ndarray, rx_bits: np.ndarray):
    """Bit error ratio with Wilson 95% CI; flagged unreliable below 100 errors."""
    tx_bits = np.asarray(tx_bits)
    rx_bits = np.asarray(rx_bits)
    if len(tx_bits) != len(rx_bits):
        raise SigError(f"bit stream length mismatch: {len(tx_bits)} vs {len(rx_bits)}")
    errors = int(np.count_nonzero(tx_bits != rx_bits))
    n = len(tx_bits)
    return errors / n, wilson_ci(errors, n), errors >= MIN_RELIABLE_ERRORS, errors


def kp4_verdict(pre_fec_ber: float, baud: float, bits_per_symbol: float):
    """KP4 pass/fail (inclusive at the threshold) and the corresponding net rate."""
    if not 0 <= pre_fec_ber <= 0.5:
        raise SigError("BER outside [0, 0.5]")
    ok = pre_fec_ber <= KP4_THRESHOLD
    net = baud * bits_per_symbol * KP4_RATE
    return ok, net


def binary_entropy(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    mask = (p > 0) & (p < 1)
    pm = p[mask]
    out[mask] = -pm * np.log2(pm) - (1 - pm) * np.log2(1 - pm)
    return out


def air_hd(pre_fec_ber: float, baud: float, bits_per_symbol: float) -> float:
    """Hard-decision achievable information rate, gross * (1 - H2(ber))."""
    if not 0 <= pre_fec_ber <= 0.5:
        raise SigError("BER outside [0, 0.5]")
    return baud * bits_per_symbol * float(1.0 - binary_entropy(pre_fec_ber))


def burst_stats(tx_symbols: np.ndarray, rx_symbols: np.ndarray):
    """Run-length histogram of consecutive symbol errors and the maximum run."""
    tx_symbols = np.asarray(tx_symbols)
    rx_symbols = np.asarray(rx_symbols)
    if len(tx_symbols) != len(rx_symbols):
        raise SigError("symbol stream length mismatch")
    err = np.concatenate([[0], (tx_symbols != rx_symbols).astype(np.int8), [0]])
    d = np.diff(err)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    runs = ends - starts
    hist: dict[int, int] = {}
    for r in runs:
        hist[int(r)] = hist.get(int(r), 0) + 1
    return hist, int(runs.max()) if len(runs) else 0


def eye_histogram(w: Waveform, baud: float, bins_phase: int = 64,
                  bins_amp: int = 64, amp_range=None) -> np.ndarray:
    """Fold samples modulo 1 UI into a (phase x amplitude) count matrix.

    Bins are left-closed; the top amplitude edge is inclusive so every sample
    lands in exactly one cell.
    """
    sps = w.sample_rate / baud
    if len(w) / sps < 1000:
        raise SigError("eye histogram needs at least 1000 symbols")
    phase = (np.arange(len(w)) / sps) % 1.0
    amp = w.samples
    if amp_range is None:
        amp_range = (amp.min(), amp.max())
    h, _, _ = np.histogram2d(phase, amp, bins=[bins_phase, bins_amp],
                             range=[(0.0, 1.0), amp_range])
    return h


def evaluate(tx_bits, rx_bits, tx_symbols, rx_symbols, baud: float,
             bits_per_symbol: float, diagnostics: dict | None = None) -> MetricsReport:
    """Assemble the full per-run report from aligned bit and symbol streams."""
    b, ci, reliable, bit_errors = ber(tx_bits, rx_bits)
    ser = float(np.mean(np.asarray(tx_symbols) != np.asarray(rx_symbols)))
    sym_errors = int(np.count_nonzero(np.asarray(tx_symbols) != np.asarray(rx_symbols)))
    ok, net = kp4_verdict(b, baud, bits_per_symbol)
    hist, max_run = burst_stats(tx_symbols, rx_symbols)
    return MetricsReport(
        gross_gbps=baud * bits_per_symbol / 1e9,
        pre_fec_ber=b,
        ber_ci=ci,
        ber_reliable=reliable,
        ser=ser,
        kp4_pass=ok,
        net_gbps_kp4=net / 1e9 if ok else 0.0,
        air_gbps=air_hd(b, baud, bits_per_symbol) / 1e9,
        burst_hist=hist,
        max_burst=max_run,
        symbols_counted=len(tx_symbols),
        bit_errors=bit_errors,
        symbol_errors=sym_errors,
        bits_counted=len(tx_bits),
        diagnostics=diagnostics or {},
    )
