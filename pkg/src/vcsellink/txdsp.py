"""Transmitter DSP: symbol mapping, duobinary precoding, pre-skew, pre-distortion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sigcore import (
    Alphabet,
    FirFilter,
    SigError,
    SymbolSeq,
    Waveform,
    fir_apply,
    fractional_delay_fir,
)

_GRAY_MAP = {(0, 0): 0, (0, 1): 1, (1, 1): 2, (1, 0): 3}
_GRAY_DEMAP = {v: k for k, v in _GRAY_MAP.items()}

# Pairs with both symbols at an outermost level are excluded to cap peak power.
_EXCLUDED_PAIRS = {(0, 0), (0, 5), (5, 0), (5, 5)}


class Pam6PairCode:
    """5 bits -> pair of PAM-6 indices; 32 of the 36 pairs used, lexicographic order."""

    def __init__(self):
        used = [(i, j) for i in range(6) for j in range(6)
                if (i, j) not in _EXCLUDED_PAIRS]
        assert len(used) == 32
        self.encode_table = np.array(used, dtype=np.int64)       # word -> (i, j)
        self.decode_table = {pair: w for w, pair in enumerate(used)}
        # Flat 36-entry LUT including nearest-valid fallback for the 4 unused pairs.
        self._decode_lut = np.empty(36, dtype=np.int64)
        for i in range(6):
            for j in range(6):
                w = self.decode_table.get((i, j))
                if w is None:
                    w = min(self.decode_table.items(),
                            key=lambda kv: ((kv[0][0] - i) ** 2 + (kv[0][1] - j) ** 2,
                                            kv[1]))[1]
                self._decode_lut[6 * i + j] = w

    def encode(self, words: np.ndarray) -> np.ndarray:
        return self.encode_table[words]

    def decode(self, pairs: np.ndarray) -> np.ndarray:
        """Pairs -> 5-bit words; unused pairs fall back to the nearest used one."""
        p = np.asarray(pairs)
        return self._decode_lut[6 * p[:, 0] + p[:, 1]]


_PAIR_CODE = Pam6PairCode()


@dataclass(frozen=True)
class PreskewConfig:
    """Per-level fractional delays in symbol units, |d| <= 0.5."""

    delays: tuple = ()
    interp_length: int = 9

    def validate(self, order: int):
        if self.delays and len(self.delays) != order:
            raise SigError("preskew needs one delay per level")
        if any(abs(d) > 0.5 for d in self.delays):
            raise SigError("preskew delay exceeds 0.5 UI")


@dataclass(frozen=True)
class DpdConfig:
    """3-tap pre-distortion [-a, 1+2a, -a]; DC gain stays 1."""

    boost: float = 0.2

    @property
    def taps(self) -> np.ndarray:
        a = self.boost
        return np.array([-a, 1.0 + 2.0 * a, -a])

    def as_filter(self, sps: int = 1) -> FirFilter:
        taps = np.zeros(2 * sps + 1)
        taps[::sps] = self.taps
        return FirFilter(taps, center=sps)


def map_bits(bits: np.ndarray, alphabet: Alphabet) -> SymbolSeq:
    bits = np.asarray(bits, dtype=np.int64)
    if alphabet.order == 4:
        if len(bits) % 2:
            raise SigError("PAM-4 needs an even number of bits")
        pairs = bits.reshape(-1, 2)
        lut = np.zeros(4, dtype=np.int64)
        for (b0, b1), idx in _GRAY_MAP.items():
            lut[2 * b0 + b1] = idx
        return SymbolSeq(alphabet, lut[2 * pairs[:, 0] + pairs[:, 1]])
    if len(bits) % 5:
        raise SigError("PAM-6 needs a multiple of 5 bits")
    words = bits.reshape(-1, 5) @ (1 << np.arange(4, -1, -1))
    return SymbolSeq(alphabet, _PAIR_CODE.encode(words).reshape(-1))


def demap_bits(s: SymbolSeq) -> np.ndarray:
    if s.alphabet.order == 4:
        lut = np.zeros((4, 2), dtype=np.int64)
        for idx, (b0, b1) in _GRAY_DEMAP.items():
            lut[idx] = (b0, b1)
        return lut[s.indices].reshape(-1)
    idx = s.indices
    if len(idx) % 2:
        idx = idx[:-1]
    words = _PAIR_CODE.decode(idx.reshape(-1, 2))
    return ((words[:, None] >> np.arange(4, -1, -1)) & 1).reshape(-1)


def db_precode(s: SymbolSeq, p0: int = 0) -> SymbolSeq:
    """p[k] = (s[k] - p[k-1]) mod M."""
    m = s.alphabet.order
    if not 0 <= p0 < m:
        raise SigError("p0 out of range")
    idx = s.indices
    # p[k] = (sum_{j<=k} (-1)^(k-j) s[j] + (-1)^(k+1) p0) mod M, computed via
    # alternating cumulative sum to stay vectorized.
    sign = np.where(np.arange(len(idx)) % 2 == 0, 1, -1)
    acc = np.cumsum(sign * idx)
    p = (sign * acc - sign * p0) % m
    return SymbolSeq(s.alphabet, p)


def db_decode_indices(p: SymbolSeq, p0: int = 0) -> SymbolSeq:
    """Inverse of db_precode: s[k] = (p[k] + p[k-1]) mod M."""
    prev = np.concatenate([[p0], p.indices[:-1]])
    return SymbolSeq(p.alphabet, (p.indices + prev) % p.alphabet.order)


def db_target_levels(alphabet: Alphabet) -> np.ndarray:
    """The 2M-1 duobinary output levels {level(i) + level(j)}."""
    lv = alphabet.levels
    return np.unique(np.add.outer(lv, lv).round(12))


def apply_preskew(s: SymbolSeq, cfg: PreskewConfig, sps: int,
                  baud: float = 1.0) -> Waveform:
    """Zero-order-hold upsample with a per-level fractional-delay interpolator."""
    cfg.validate(s.alphabet.order)
    delays = cfg.delays or (0.0,) * s.alphabet.order
    if any(delays) and sps < 2:
        raise SigError("nonzero preskew requires sps >= 2")
    levels = s.levels
    n = len(s) * sps
    out = np.zeros(n)
    for i, d in enumerate(delays):
        mask = s.indices == i
        if not mask.any():
            continue
        zoh = np.repeat(np.where(mask, levels, 0.0), sps)
        out += fir_apply(zoh, fractional_delay_fir(d * sps, cfg.interp_length))
    return Waveform(baud * sps, out)


@dataclass(frozen=True)
class TxResult:
    waveform: Waveform
    precoded: SymbolSeq
    data: SymbolSeq


def tx_chain(bits: np.ndarray, cfg) -> TxResult:
    """Full TX path: map -> DB precode -> preskew upsample -> DPD."""
    alphabet = Alphabet(cfg.order)
    data = map_bits(bits, alphabet)
    precoded = db_precode(data, p0=0)
    pre = PreskewConfig(tuple(cfg.dsp.preskew_delays), cfg.dsp.preskew_length)
    w = apply_preskew(precoded, pre, cfg.sps_sim, baud=cfg.baud_hz)
    dpd = DpdConfig(cfg.dsp.dpd_boost)
    w = fir_apply(w, dpd.as_filter(cfg.sps_sim))
    return TxResult(w, precoded, data)
