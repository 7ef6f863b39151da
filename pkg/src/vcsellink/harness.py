"""Experiment orchestration: configs, single runs, sweep grids, CSV/JSON output."""
from __future__ import annotations

import copy
import dataclasses
import json
import multiprocessing
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import linkmodel, metrics, rxdsp, txdsp
from .linkmodel import AdcModel, ComponentBandwidths, FiberModel, VcselModel, calibrate_rx_bw
from .metrics import MetricsReport
from .sigcore import Alphabet, SigError, Waveform, prbs_bits, shift_waveform

SEED_STRIDE = 0x9E3779B97F4A7C15
U64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Validation failure; message names the offending field path."""


@dataclass
class DspConfig:
    mode: str = "vnle_nc_mlse"
    dpd_boost: float = 0.2
    preskew_delays: tuple = ()
    preskew_length: int = 9
    vnle_taps: int = 201
    vnle_memory: int = 11
    mu_lin: float = 1e-3
    mu_nl: float = 1e-4
    decision_directed: bool = True
    traceback_depth: int = 32
    train_symbols: int = 20000
    guard_symbols: int = 1024
    timing: str = "trained"           # "trained" | "genie"


@dataclass
class LinkConfig:
    modulation: str = "PAM4"
    baud_gbd: float = 106.25
    sps_sim: int = 4
    bandwidths: ComponentBandwidths = field(default_factory=ComponentBandwidths)
    vcsel: VcselModel = field(default_factory=VcselModel)
    fiber: FiberModel = field(default_factory=FiberModel)
    adc: AdcModel = field(default_factory=AdcModel)
    oma_dbm: float = 1.0
    dsp: DspConfig = field(default_factory=DspConfig)
    symbols: int = 1_000_000
    seed: int = 12345

    @property
    def order(self) -> int:
        return 4 if self.modulation == "PAM4" else 6

    @property
    def baud_hz(self) -> float:
        return self.baud_gbd * 1e9

    @property
    def bits_per_symbol(self) -> float:
        return Alphabet(self.order).bits_per_symbol

    @property
    def gross_gbps(self) -> float:
        return self.baud_gbd * self.bits_per_symbol


def _check(cond: bool, path: str, msg: str):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def validate(cfg: LinkConfig) -> LinkConfig:
    _check(cfg.modulation in ("PAM4", "PAM6"), "modulation", "must be PAM4 or PAM6")
    _check(cfg.baud_gbd > 0, "baud_gbd", "must be positive")
    _check(2 <= cfg.sps_sim <= 16, "sps_sim", "must be in [2, 16]")
    b = cfg.bandwidths
    for name in ("dac_6db_hz", "driver_3db_hz", "vcsel_3db_hz", "target_e2e_3db_hz"):
        _check(getattr(b, name) > 0, f"bandwidths.{name}", "must be positive")
    _check(b.target_e2e_3db_hz <= min(b.dac_6db_hz, b.driver_3db_hz, b.vcsel_3db_hz),
           "bandwidths.target_e2e_3db_hz", "must not exceed any component bandwidth")
    _check(0 < cfg.vcsel.modulation_index <= 1, "vcsel.modulation_index", "must be in (0, 1]")
    _check(cfg.vcsel.bias > cfg.vcsel.threshold, "vcsel.bias", "must exceed threshold")
    _check(cfg.vcsel.f3db_hz > 0, "vcsel.f3db_hz", "must be positive")
    _check(cfg.fiber.length_m >= 0, "fiber.length_m", "must be >= 0")
    _check(cfg.fiber.emb_mhz_km > 0, "fiber.emb_mhz_km", "must be positive")
    _check(cfg.adc.sps_out in (1, 2), "adc.sps_out", "must be 1 or 2")
    _check(cfg.adc.resolution_bits >= 4, "adc.resolution_bits", "must be >= 4")
    _check(abs(cfg.adc.timing_offset_ui) <= 0.5, "adc.timing_offset_ui", "|offset| <= 0.5 UI")
    _check(-30 <= cfg.oma_dbm <= 20, "oma_dbm", "must be in [-30, 20] dBm")
    d = cfg.dsp
    _check(d.mode in rxdsp.DSP_MODES, "dsp.mode", f"must be one of {rxdsp.DSP_MODES}")
    _check(d.vnle_taps % 2 == 1 and d.vnle_taps >= 3, "dsp.vnle_taps", "odd, >= 3")
    _check(d.vnle_memory >= 2, "dsp.vnle_memory", "must be >= 2")
    _check(d.mu_lin > 0 and d.mu_nl > 0, "dsp.mu_lin", "step sizes must be positive")
    _check(not d.preskew_delays or len(d.preskew_delays) == cfg.order,
           "dsp.preskew_delays", "one delay per level")
    _check(all(abs(x) <= 0.5 for x in d.preskew_delays), "dsp.preskew_delays", "|d| <= 0.5")
    _check(d.traceback_depth >= 1, "dsp.traceback_depth", "must be >= 1")
    _check(d.train_symbols >= 1000, "dsp.train_symbols", "must be >= 1000")
    _check(d.guard_symbols >= 0, "dsp.guard_symbols", "must be >= 0")
    _check(d.timing in ("trained", "genie"), "dsp.timing", "trained or genie")
    _check(cfg.symbols >= 10000, "symbols", "must be >= 10000")
    _check(0 <= cfg.seed <= U64, "seed", "must fit in 64 bits")
    return cfg


def to_dict(cfg: LinkConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["dsp"]["preskew_delays"] = list(d["dsp"]["preskew_delays"])
    return d


def from_dict(d: dict) -> LinkConfig:
    d = copy.deepcopy(d)
    try:
        sub = {
            "bandwidths": ComponentBandwidths,
            "vcsel": VcselModel,
            "fiber": FiberModel,
            "adc": AdcModel,
            "dsp": DspConfig,
        }
        kwargs = {}
        for key, val in d.items():
            if key in sub:
                kwargs[key] = sub[key](**val)
            else:
                kwargs[key] = val
        if "dsp" in kwargs:
            kwargs["dsp"].preskew_delays = tuple(kwargs["dsp"].preskew_delays)
        cfg = LinkConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return validate(cfg)


def load_config(path: str) -> LinkConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    base = to_dict(LinkConfig())
    _deep_update(base, data)
    return from_dict(base)


def dump_config(cfg: LinkConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def _deep_update(base: dict, upd: dict):
    for k, v in upd.items():
        if k not in base:
            raise ConfigError(f"{k}: unknown field")
        if isinstance(v, dict) and isinstance(base[k], dict):
            _deep_update(base[k], v)
        else:
            base[k] = v


# ---------------------------------------------------------------------------
# single point

def _prbs_seed(seed: int) -> int:
    s = (seed * 0x2545F4914F6CDD1D + 1) & ((1 << 31) - 1)
    return s or 1


def _simulate_capture(cfg: LinkConfig, seed: int, measure_symbols: int):
    """TX DSP + analog link; returns (bits, TxResult, captured waveform)."""
    n_sym = cfg.dsp.train_symbols + cfg.dsp.guard_symbols + measure_symbols
    n_sym += n_sym % 2
    if cfg.order == 4:
        n_bits = 2 * n_sym
    else:
        n_bits = 5 * (n_sym // 2)
    bits = prbs_bits(31, _prbs_seed(seed), n_bits)

    tx = txdsp.tx_chain(bits, cfg)
    ss = np.random.SeedSequence(seed & U64)
    seed_rin, seed_adc = ss.spawn(2)
    drive = linkmodel.apply_response(tx.waveform, cfg.bandwidths.electrical_response)
    w = linkmodel.vcsel_transfer(drive, cfg.vcsel, seed_rin)
    w = linkmodel.fiber_transfer(w, cfg.fiber)
    w = linkmodel.set_oma(w, cfg.oma_dbm, baud=cfg.baud_hz, order=cfg.order)
    rx_bw = calibrate_rx_bw(cfg.bandwidths)
    w = linkmodel.detect_and_digitize(w, cfg.adc, seed_adc, rx_bw, cfg.baud_hz)
    return bits, tx, w


def _simulate_block(cfg: LinkConfig, seed: int, measure_symbols: int):
    """One end-to-end trial; returns aligned tx/rx bit and symbol streams."""
    alphabet = Alphabet(cfg.order)
    bits, tx, w = _simulate_capture(cfg, seed, measure_symbols)
    rx = rxdsp.rx_chain(w, cfg, tx)

    skip = cfg.dsp.train_symbols + cfg.dsp.guard_symbols
    skip += skip % 2
    n_cmp = min(len(tx.data), len(rx.data_symbols)) - skip
    n_cmp -= n_cmp % 2
    if n_cmp <= 0:
        raise SigError("no symbols left after guard removal")
    tx_sym = tx.data.indices[skip:skip + n_cmp]
    rx_sym = rx.data_symbols.indices[skip:skip + n_cmp]
    bit_off = int(skip * alphabet.bits_per_symbol)
    n_bits_cmp = int(n_cmp * alphabet.bits_per_symbol)
    tx_b = bits[bit_off:bit_off + n_bits_cmp]
    rx_b = rx.bits[bit_off:bit_off + n_bits_cmp]
    return tx_b, rx_b, tx_sym, rx_sym, rx.diagnostics


MAX_EXTEND = 4


def run_point(cfg: LinkConfig) -> MetricsReport:
    """PRBS -> TX DSP -> analog link -> RX DSP -> metrics, with auto-extension
    until at least 100 bit errors or the 4x cap."""
    validate(cfg)
    tx_bits = []
    rx_bits = []
    tx_syms = []
    rx_syms = []
    diag = None
    errors = 0
    blocks = 0
    for i in range(MAX_EXTEND):
        tb, rb, ts, rs, d = _simulate_block(
            cfg, (cfg.seed + i * 0x51ED2701) & U64, cfg.symbols)
        tx_bits.append(tb)
        rx_bits.append(rb)
        tx_syms.append(ts)
        rx_syms.append(rs)
        if diag is None:
            diag = d
        errors += int(np.count_nonzero(tb != rb))
        blocks = i + 1
        if errors >= metrics.MIN_RELIABLE_ERRORS or errors == 0:
            break
    diag = dict(diag or {})
    diag["blocks_run"] = blocks
    diag["extension_capped"] = blocks == MAX_EXTEND and errors < metrics.MIN_RELIABLE_ERRORS
    report = metrics.evaluate(
        np.concatenate(tx_bits), np.concatenate(rx_bits),
        np.concatenate(tx_syms), np.concatenate(rx_syms),
        cfg.baud_hz, cfg.bits_per_symbol, diagnostics=diag)
    return report


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepSpec:
    base: dict = field(default_factory=dict)
    axes: list = field(default_factory=list)      # [(field path, [values])]
    repeats: int = 1
    base_seed: int = 12345


def load_sweep(path: str) -> SweepSpec:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    axes = [(a["path"], list(a["values"])) for a in data.get("axes", [])]
    return SweepSpec(base=data.get("base", {}), axes=axes,
                     repeats=int(data.get("repeats", 1)),
                     base_seed=int(data.get("base_seed", 12345)))


def _set_path(d: dict, path: str, value):
    parts = path.split(".")
    for p in parts[:-1]:
        if p not in d:
            raise ConfigError(f"{path}: unknown field")
        d = d[p]
    if parts[-1] not in d:
        raise ConfigError(f"{path}: unknown field")
    d[parts[-1]] = value


def sweep_points(spec: SweepSpec):
    """Expand the grid; every point validated before any run starts."""
    base = to_dict(LinkConfig())
    _deep_update(base, spec.base)
    grids = [[(path, v) for v in values] for path, values in spec.axes]
    points = []
    idx = 0
    from itertools import product

    for combo in product(*grids) if grids else [()]:
        for rep in range(spec.repeats):
            d = copy.deepcopy(base)
            coords = {}
            for path, v in combo:
                _set_path(d, path, v)
                coords[path] = v
            seed = (spec.base_seed ^ ((idx * SEED_STRIDE) & U64)) & U64
            d["seed"] = seed
            cfg = from_dict(d)
            points.append({"index": idx, "coords": coords, "repeat": rep, "cfg": cfg})
            idx += 1
    return points


def _run_one(point: dict) -> dict:
    cfg = point["cfg"]
    row = {
        "index": point["index"],
        "coords": point["coords"],
        "repeat": point["repeat"],
        "modulation": cfg.modulation,
        "baud_gbd": cfg.baud_gbd,
        "gross_gbps": cfg.gross_gbps,
        "oma_dbm": cfg.oma_dbm,
        "fiber_m": cfg.fiber.length_m,
        "dsp_mode": cfg.dsp.mode,
        "seed": cfg.seed,
        "symbols": cfg.symbols,
    }
    try:
        rep = run_point(cfg)
    except Exception as exc:  # per-point failures never abort the sweep
        row.update({"error": f"{type(exc).__name__}: {exc}"})
        return row
    row.update({
        "pre_fec_ber": rep.pre_fec_ber,
        "ber_ci_lo": rep.ber_ci[0],
        "ber_ci_hi": rep.ber_ci[1],
        "ser": rep.ser,
        "kp4_pass": rep.kp4_pass,
        "net_gbps_kp4": rep.net_gbps_kp4,
        "air_gbps": rep.air_gbps,
        "ber_reliable": rep.ber_reliable,
        "bit_errors": rep.bit_errors,
        "max_burst": rep.max_burst,
        "diagnostics": rep.diagnostics,
    })
    return row


def run_sweep(spec: SweepSpec, parallelism: int = 1) -> list:
    points = sweep_points(spec)
    if parallelism <= 1 or len(points) <= 1:
        rows = [_run_one(p) for p in points]
    else:
        with multiprocessing.get_context("spawn").Pool(parallelism) as pool:
            rows = pool.map(_run_one, points)
    return sorted(rows, key=lambda r: r["index"])


# ---------------------------------------------------------------------------
# emission

CSV_COLUMNS = ["modulation", "baud_gbd", "gross_gbps", "oma_dbm", "fiber_m",
               "dsp_mode", "seed", "symbols", "pre_fec_ber", "ber_ci_lo",
               "ber_ci_hi", "ser", "kp4_pass", "net_gbps_kp4", "air_gbps"]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def emit(results: list, fmt: str, path: str) -> str:
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for row in results:
            lines.append(",".join(_fmt(row.get(c, "")) for c in CSV_COLUMNS))
        text = "\n".join(lines) + "\n"
        with open(path, "w") as fh:
            fh.write(text)
        return path
    if fmt == "json":
        payload = []
        sidecar_dir = os.path.splitext(path)[0] + "_sidecar"
        for row in results:
            r = {k: v for k, v in row.items() if k != "diagnostics"}
            diag = row.get("diagnostics") or {}
            dd = {}
            for key, val in diag.items():
                if isinstance(val, np.ndarray):
                    if val.ndim == 2:       # eye matrices go to sidecar CSVs
                        os.makedirs(sidecar_dir, exist_ok=True)
                        fname = os.path.join(sidecar_dir, f"{key}_{row['index']}.csv")
                        np.savetxt(fname, val, delimiter=",", fmt="%.12g")
                        dd[key + "_file"] = fname
                    else:
                        dd[key] = [float(x) for x in val]
                elif isinstance(val, (np.floating, np.integer)):
                    dd[key] = val.item()
                elif isinstance(val, dict):
                    dd[key] = {str(k): (v.item() if hasattr(v, "item") else v)
                               for k, v in val.items()}
                else:
                    dd[key] = val
            r["diagnostics"] = dd
            payload.append(r)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, default=str)
        return path
    raise ConfigError(f"format: unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# eye capture

def eye_matrix(cfg: LinkConfig, bins_phase: int = 64, bins_amp: int = 64) -> np.ndarray:
    """Equalizer-output eye at 2 samples/symbol (the trained VNLE applied with
    half-symbol tap spacing)."""
    validate(cfg)
    cfg2 = copy.deepcopy(cfg)
    cfg2.adc = dataclasses.replace(cfg.adc, sps_out=2)
    alphabet = Alphabet(cfg.order)
    bits, tx, w = _simulate_capture(cfg2, cfg.seed, min(cfg.symbols, 50000))

    training = rxdsp.SymbolSeq(alphabet, tx.precoded.indices[:cfg2.dsp.train_symbols])
    stream, tinfo = rxdsp.timing_recover(w, training, cfg2.baud_hz)
    x1 = stream.samples
    mu, sd = x1.mean(), x1.std()
    st0 = rxdsp.VnleState(alphabet, n_lin=cfg2.dsp.vnle_taps, memory=cfg2.dsp.vnle_memory,
                          mu_lin=cfg2.dsp.mu_lin, mu_nl=cfg2.dsp.mu_nl)
    st = rxdsp.vnle_train((x1 - mu) / sd, training, st0)

    ui = 1.0 / cfg2.baud_hz
    sps_i = int(round(w.sample_rate / cfg2.baud_hz))
    shifted = shift_waveform(w, -tinfo["shift_ui"] * ui)
    x2 = shifted.samples[tinfo["lag_symbols"] * sps_i:]
    x2 = (x2 - mu) / sd
    # zero-stuff the taps to half-symbol spacing
    from .sigcore import FirFilter, fir_apply

    wl = np.zeros(2 * st.n_lin - 1)
    wl[::2] = st.wlin
    c2 = 2 * st.center
    lin = fir_apply(x2, FirFilter(wl[::-1], len(wl) - 1 - c2))
    wsq = np.zeros(2 * st.memory - 1)
    wsq[::2] = st.wsq
    sq = fir_apply(x2 * x2, FirFilter(wsq, 0))
    prev = np.concatenate([np.zeros(2), x2[:-2]])
    wcr = np.zeros(2 * (st.memory - 1) - 1)
    wcr[::2] = st.wcr
    cr = fir_apply(x2 * prev, FirFilter(wcr, 0))
    y2 = lin + sq + cr
    guard = 2 * (cfg2.dsp.train_symbols + cfg2.dsp.guard_symbols)
    return metrics.eye_histogram(Waveform(2 * cfg2.baud_hz, y2[guard:]),
                                 cfg2.baud_hz, bins_phase, bins_amp)
