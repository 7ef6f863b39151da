"""Receiver DSP: timing recovery, DB-targeted Volterra equalizer, feed-forward
noise cancellation with Burg whitening, M-state MLSE, duobinary decoding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .sigcore import Alphabet, FirFilter, SigError, SymbolSeq, Waveform, fir_apply, shift_waveform
from .txdsp import db_decode_indices, db_target_levels, demap_bits

N_LIN_DEFAULT = 201
MEMORY_DEFAULT = 11


class EqualizerDivergence(RuntimeError):
    def __init__(self, mu_lin, mu_nl, mse_trace):
        super().__init__(f"LMS diverged (mu_lin={mu_lin}, mu_nl={mu_nl})")
        self.mu_lin = mu_lin
        self.mu_nl = mu_nl
        self.mse_trace = mse_trace


# ---------------------------------------------------------------------------
# state types

@dataclass
class VnleState:
    alphabet: Alphabet
    n_lin: int = N_LIN_DEFAULT
    memory: int = MEMORY_DEFAULT
    mu_lin: float = 1e-3
    mu_nl: float = 1e-4
    wlin: np.ndarray = None
    wsq: np.ndarray = None
    wcr: np.ndarray = None
    last_mse: float = float("nan")
    mse_trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        if self.wlin is None:
            self.wlin = np.zeros(self.n_lin)
            self.wlin[self.center] = 1.0
        if self.wsq is None:
            self.wsq = np.zeros(self.memory)
        if self.wcr is None:
            self.wcr = np.zeros(self.memory - 1)

    @property
    def center(self) -> int:
        return self.n_lin // 2

    @property
    def n_features(self) -> int:
        return self.n_lin + self.memory + (self.memory - 1)

    @property
    def target_grid(self) -> np.ndarray:
        return db_target_levels(self.alphabet)

    def copy(self) -> "VnleState":
        return VnleState(self.alphabet, self.n_lin, self.memory, self.mu_lin,
                         self.mu_nl, self.wlin.copy(), self.wsq.copy(),
                         self.wcr.copy(), self.last_mse, self.mse_trace.copy())


@dataclass
class NoiseCancelerState:
    whitening: FirFilter
    ar_order: int = 3
    window: int = 0

    def __post_init__(self):
        n = len(self.whitening.taps)
        if n != 2 * self.ar_order + 1 or self.whitening.center != self.ar_order:
            raise SigError("whitening filter must be symmetric around a unit center tap")


@dataclass(frozen=True)
class TrellisSpec:
    alphabet: Alphabet
    traceback_depth: int = 32

    @property
    def states(self) -> int:
        return self.alphabet.order

    @property
    def branch_targets(self) -> np.ndarray:
        """targets[j, i] = level(i) + level(j) for the transition j -> i."""
        lv = self.alphabet.levels
        return np.add.outer(lv, lv)


# ---------------------------------------------------------------------------
# timing recovery

def db_reference_levels(p: SymbolSeq, p0: int = 0) -> np.ndarray:
    """Expected duobinary samples level(p[k]) + level(p[k-1]) of a precoded stream."""
    lv = p.levels
    prev = np.concatenate([[p.alphabet.level(p0)], lv[:-1]])
    return lv + prev


def _scratch_mse(x: np.ndarray, target: np.ndarray, taps: int = 33) -> float:
    """Residual MSE of a least-squares linear equalizer fit (the phase-search score).

    The fit is constrained to symmetric (linear-phase) taps so it cannot absorb a
    fractional delay itself; that keeps the minimum pinned to the sampling phase.
    """
    c = taps // 2
    n = min(len(x) - taps, len(target) - taps)
    win = np.lib.stride_tricks.sliding_window_view(x, taps)[:n]
    rows = np.empty((n, c + 1))
    rows[:, 0] = win[:, c]
    for i in range(1, c + 1):
        rows[:, i] = win[:, c - i] + win[:, c + i]
    t = target[c:c + n]
    sol, *_ = np.linalg.lstsq(rows, t, rcond=None)
    r = rows @ sol - t
    return float(r @ r / len(r)) / float(np.var(t))


def timing_recover(w: Waveform, training: SymbolSeq, baud: float,
                   phase_override: float | None = None,
                   n_phases: int = 16, search_lag: int = 512):
    """Pick the sampling phase minimizing scratch-equalizer MSE on the training
    sequence; returns the symbol-rate stream aligned to training index 0."""
    if len(training) < 256:
        raise SigError("timing recovery needs at least 256 training symbols")
    sps_f = w.sample_rate / baud
    sps_i = int(round(sps_f))
    if abs(sps_f - sps_i) > 1e-9 or sps_i < 1:
        raise SigError("waveform rate must be an integer multiple of baud")
    ref = db_reference_levels(training)
    ref_n = (ref - ref.mean()) / ref.std()

    x0 = w.samples[::sps_i]
    xn = (x0 - x0.mean()) / x0.std()
    n_ref = min(len(ref_n), 4000)
    lags = min(search_lag, len(xn) - n_ref - 1)
    corr = np.correlate(xn[:n_ref + lags], ref_n[:n_ref], mode="valid")
    lag = int(np.argmax(corr))

    ui = 1.0 / baud
    win_sym = min(len(ref), 4000)
    margin = 64
    a = max(0, (lag - margin) * sps_i)
    b = min(len(w), (lag + win_sym + margin) * sps_i)
    chunk = Waveform(w.sample_rate, w.samples[a:b])

    def stream_at(phase: float, src: Waveform, start: int) -> np.ndarray:
        shifted = shift_waveform(src, -phase * ui)
        return shifted.samples[::sps_i]

    if phase_override is not None:
        best_phase = phase_override
    else:
        # scan one full UI centered on the correlation alignment; the symmetric
        # scratch equalizer cannot absorb delay, so the score is a single bowl
        phases = np.arange(n_phases) / n_phases - 0.5
        scores = []
        off = lag - a // sps_i
        for ph in phases:
            s = stream_at(ph, chunk, a)[off:off + win_sym]
            m = min(len(s), win_sym)
            scores.append(_scratch_mse(s[:m], ref[:m]))
        scores = np.asarray(scores)
        k = int(np.argmin(scores))
        sm = scores[k - 1] if k > 0 else scores[k]
        sp = scores[k + 1] if k + 1 < n_phases else scores[k]
        denom = sm - 2 * scores[k] + sp
        delta = 0.5 * (sm - sp) / denom if denom > 0 else 0.0
        best_phase = float(phases[k] + np.clip(delta, -0.5, 0.5) / n_phases)

    full = shift_waveform(w, -best_phase * ui)
    out = full.samples[::sps_i][lag:]
    # reported phase is the estimated sampling offset of the capture: injecting
    # a known ADC timing offset moves it by exactly that amount (mod 1 UI)
    info = {"phase_ui": float(-best_phase % 1.0), "shift_ui": best_phase,
            "lag_symbols": lag}
    return Waveform(baud, out), info


# ---------------------------------------------------------------------------
# Volterra equalizer

def vnle_features(window: np.ndarray, memory: int = MEMORY_DEFAULT) -> np.ndarray:
    """Feature vector for one symbol: linear window then squares then adjacent
    products of the most recent `memory` samples (aligned to the center tap)."""
    window = np.asarray(window, dtype=np.float64)
    c = len(window) // 2
    recent = window[c - memory + 1:c + 1][::-1]          # x[k], x[k-1], ...
    sq = recent * recent
    cr = recent[:memory - 1] * recent[1:memory]
    return np.concatenate([window, sq, cr])


def _pad_for(st: VnleState, x: np.ndarray) -> np.ndarray:
    pad = st.n_lin
    xp = np.zeros(len(x) + 2 * pad)
    xp[pad:pad + len(x)] = x
    return xp


def _run_lms(x, targets, n_known, st: VnleState, dd: bool):
    grid = st.target_grid
    xp = _pad_for(st, x)
    y = np.empty(len(x))
    kernels.lms_run(xp, st.n_lin, len(x), np.ascontiguousarray(targets, dtype=np.float64),
                    int(n_known), st.wlin, st.center, st.wsq, st.wcr,
                    st.mu_lin, st.mu_nl, int(dd),
                    float(grid[0]), float(grid[1] - grid[0]), len(grid), y)
    return y


def vnle_train(x, known: SymbolSeq, st: VnleState, block: int = 1000):
    """LMS training against the duobinary response of the known precoded stream."""
    data = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    targets = db_reference_levels(known)
    n = min(len(data), len(targets))
    out = st.copy()
    y = _run_lms(data[:n], targets[:n], n, out, dd=False)
    err = (y - targets[:n]) ** 2
    nb = n // block
    trace = err[:nb * block].reshape(nb, block).mean(axis=1)
    out.mse_trace = trace
    out.last_mse = float(trace[-1]) if nb else float(err.mean())
    if not (np.all(np.isfinite(out.wlin)) and np.all(np.isfinite(out.wsq))
            and np.all(np.isfinite(out.wcr))):
        raise EqualizerDivergence(st.mu_lin, st.mu_nl, trace)
    if nb >= 6 and np.all(np.diff(trace[-6:]) > 0):
        raise EqualizerDivergence(st.mu_lin, st.mu_nl, trace)
    return out


def vnle_apply(x, st: VnleState, decision_directed: bool = False):
    """Equalize a stream with a trained state; optionally keep adapting with
    slicer decisions as targets."""
    data = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    if decision_directed:
        stc = st.copy()
        y = _run_lms(data, np.empty(0), 0, stc, dd=True)
        return (Waveform(x.sample_rate, y) if isinstance(x, Waveform) else y), stc
    n_lin, c = st.n_lin, st.center
    lin = fir_apply(data, FirFilter(st.wlin[::-1], n_lin - 1 - c))
    sq = fir_apply(data * data, FirFilter(st.wsq, 0))
    prev = np.concatenate([[0.0], data[:-1]])
    cr = fir_apply(data * prev, FirFilter(st.wcr, 0))
    y = lin + sq + cr
    return (Waveform(x.sample_rate, y) if isinstance(x, Waveform) else y), st


def slice_db(y: np.ndarray, alphabet: Alphabet) -> np.ndarray:
    """Nearest duobinary grid index (0 .. 2M-2) for each soft sample."""
    grid = db_target_levels(alphabet)
    idx = np.round((y - grid[0]) / (grid[1] - grid[0])).astype(np.int64)
    return np.clip(idx, 0, len(grid) - 1)


# ---------------------------------------------------------------------------
# Burg whitening + noise cancellation

def burg_ar(e: np.ndarray, order: int) -> np.ndarray:
    """Burg AR estimate; returns c with e[k] ~= sum_i c[i] e[k-i-1]."""
    x = np.asarray(e, dtype=np.float64)
    if len(x) <= 10 * order:
        raise SigError("too few samples for Burg estimation")
    if np.var(x) == 0:
        raise SigError("constant input has no AR structure")
    f = x.copy()
    b = x.copy()
    a = np.array([1.0])
    for m in range(order):
        fs = f[m + 1:]
        bs = b[m:-1]
        denom = fs @ fs + bs @ bs
        k = -2.0 * (fs @ bs) / denom if denom > 0 else 0.0
        f_new = fs + k * bs
        b_new = bs + k * fs
        f[m + 1:] = f_new
        b[m + 1:] = b_new
        a = np.concatenate([a, [0.0]])
        a = a + k * a[::-1]
    return -a[1:]


def nc_build(y: np.ndarray, decisions: np.ndarray, order: int = 3,
             error_rate: float | None = None) -> NoiseCancelerState:
    """Two-sided whitening filter from forward/backward Burg AR fits of the
    equalizer residual."""
    if error_rate is not None and error_rate >= 0.2:
        raise SigError(f"slicer error rate {error_rate:.2f} too high for noise estimate")
    e = np.asarray(y, dtype=np.float64) - np.asarray(decisions, dtype=np.float64)
    a_f = burg_ar(e, order)
    a_b = burg_ar(e[::-1], order)
    taps = np.zeros(2 * order + 1)
    taps[order] = 1.0
    # prediction coefficients, negated and halved on each side
    taps[order + 1:] = -a_f / 2.0
    taps[order - 1::-1] = -a_b / 2.0
    return NoiseCancelerState(FirFilter(taps, order), order, len(e))


def nc_apply(y: np.ndarray, decisions: np.ndarray, st: NoiseCancelerState) -> np.ndarray:
    e = np.asarray(y, dtype=np.float64) - np.asarray(decisions, dtype=np.float64)
    return np.asarray(decisions, dtype=np.float64) + fir_apply(e, st.whitening)


# ---------------------------------------------------------------------------
# MLSE

def mlse_detect(z, spec: TrellisSpec, init_state: int = 0) -> SymbolSeq:
    """Viterbi over the M-state duobinary trellis with windowed traceback."""
    data = z.samples if isinstance(z, Waveform) else np.asarray(z, dtype=np.float64)
    data = np.ascontiguousarray(data, dtype=np.float64)
    targets = np.ascontiguousarray(spec.branch_targets, dtype=np.float64)
    n = len(data)
    m = spec.states
    bp = np.empty((n, m), dtype=np.int8)
    bs = np.empty(n, dtype=np.int8)
    kernels.viterbi_forward(data, targets, int(init_state), bp, bs)
    out = _traceback(bp, bs, spec.traceback_depth)
    return SymbolSeq(spec.alphabet, out)


def _traceback(bp: np.ndarray, bs: np.ndarray, depth: int) -> np.ndarray:
    n = bp.shape[0]
    out = np.empty(n, dtype=np.int64)
    d = min(depth, n)
    if n > d:
        ts = np.arange(d, n)
        cur = bs[ts].astype(np.int64)
        for i in range(d):
            cur = bp[ts - i, cur]
        out[ts - d] = cur
    s = int(bs[-1])
    for t in range(n - 1, max(n - d, 0) - 1, -1):
        out[t] = s
        s = int(bp[t, s])
    return out


def db_decode(p_hat: SymbolSeq, p0: int = 0) -> SymbolSeq:
    """Duobinary re-encode + modulo-M decode of precoded-domain decisions."""
    return db_decode_indices(p_hat, p0)


# ---------------------------------------------------------------------------
# full receiver

DSP_MODES = ("vnle", "vnle_mlse", "vnle_nc_mlse")


@dataclass
class RxResult:
    data_symbols: SymbolSeq
    bits: np.ndarray
    diagnostics: dict


def rx_chain(captured: Waveform, cfg, truth) -> RxResult:
    """Timing recovery -> VNLE -> (NC) -> (MLSE | slicer) -> DB decode -> demap."""
    alphabet = Alphabet(cfg.order)
    mode = cfg.dsp.mode
    if mode not in DSP_MODES:
        raise SigError(f"unknown DSP mode {mode!r}")
    t_len = cfg.dsp.train_symbols
    training = SymbolSeq(alphabet, truth.precoded.indices[:t_len])

    phase = None if cfg.dsp.timing == "trained" else 0.0
    stream, tinfo = timing_recover(captured, training, cfg.baud_hz,
                                   phase_override=phase)
    x = stream.samples
    x = (x - x.mean()) / x.std()

    st0 = VnleState(alphabet, n_lin=cfg.dsp.vnle_taps, memory=cfg.dsp.vnle_memory,
                    mu_lin=cfg.dsp.mu_lin, mu_nl=cfg.dsp.mu_nl)
    st = vnle_train(x[:t_len], training, st0)
    y, st = vnle_apply(x, st, decision_directed=cfg.dsp.decision_directed)

    grid = db_target_levels(alphabet)
    t_idx = slice_db(y, alphabet)
    train_ref_idx = slice_db(db_reference_levels(training), alphabet)
    slicer_err = float(np.mean(t_idx[:t_len] != train_ref_idx[:len(t_idx[:t_len])]))

    diag = {
        "timing": tinfo,
        "train_mse": st.last_mse,
        "mse_trace": st.mse_trace,
        "vnle_linear_taps": st.wlin.copy(),
        "vnle_sq_taps": st.wsq.copy(),
        "vnle_cross_taps": st.wcr.copy(),
        "slicer_error_rate_training": slicer_err,
    }

    if mode == "vnle":
        s_hat = SymbolSeq(alphabet, t_idx % alphabet.order)
    else:
        z = y
        if mode == "vnle_nc_mlse":
            d = grid[t_idx]
            ncs = nc_build(y, d, order=3, error_rate=slicer_err)
            z = nc_apply(y, d, ncs)
            diag["nc_taps"] = ncs.whitening.taps.copy()
        trellis = TrellisSpec(alphabet, cfg.dsp.traceback_depth)
        p_hat = mlse_detect(z, trellis, init_state=0)
        s_hat = db_decode(p_hat)

    bits = demap_bits(s_hat)
    return RxResult(s_hat, bits, diag)
