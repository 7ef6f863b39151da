"""Render paper-style figures from sweep CSV/JSON files.

Pure display layer: reads the documented result schema, never recomputes
DSP or metrics, and renders deterministically (same input bytes in, same
image bytes out).
"""
from __future__ import annotations

import csv
import json
import sys
import warnings
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KP4_BER = 2.2e-4
KINDS = ("ber_vs_rate", "ber_vs_oma", "air_vs_rate", "eye", "taps")
BER_FLOOR = 1e-8          # display floor so zero-error points stay visible

_DEFAULT_GROUPS = {
    "ber_vs_rate": ["modulation", "dsp_mode"],
    "ber_vs_oma": ["fiber_m"],
    "air_vs_rate": ["modulation"],
}

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class FigureError(ValueError):
    """Unusable input: unknown kind or missing columns (named in message)."""


@dataclass
class FigureSpec:
    inputs: list
    kind: str
    out: str
    group: list = field(default_factory=list)
    logy: bool | None = None

    def __post_init__(self):
        if isinstance(self.inputs, str):
            self.inputs = [self.inputs]
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {KINDS}")
        if not self.group:
            self.group = list(_DEFAULT_GROUPS.get(self.kind, []))


# ---------------------------------------------------------------------------
# input parsing

def _coerce(v):
    if isinstance(v, str):
        s = v.strip()
        if s in ("true", "false"):
            return s == "true"
        try:
            return int(s)
        except ValueError:
            pass
        try:
            return float(s)
        except ValueError:
            return s
    return v


def read_rows(path: str) -> list:
    """Result table rows from a sweep CSV or JSON file."""
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    with open(path, newline="") as fh:
        return [{k: _coerce(v) for k, v in row.items()}
                for row in csv.DictReader(fh)]


def _require(rows: list, cols: list, path: str):
    if not rows:
        return
    missing = [c for c in cols if c not in rows[0]]
    if missing:
        raise FigureError(f"{path}: missing columns {', '.join(missing)}")


def _reliable(row) -> bool:
    """A point is reliable when it saw at least 100 bit errors."""
    if "ber_reliable" in row:
        return bool(row["ber_reliable"])
    bps = 2.5 if row.get("modulation") == "PAM6" else 2.0
    errors = float(row["pre_fec_ber"]) * float(row["symbols"]) * bps
    return errors >= 100.0


def _groups(rows: list, cols: list):
    """Rows grouped by the requested columns, in sorted label order."""
    out = {}
    for row in rows:
        key = tuple(row.get(c) for c in cols)
        out.setdefault(key, []).append(row)
    for key in sorted(out, key=lambda k: tuple(str(x) for x in k)):
        label = ", ".join(f"{c}={v}" for c, v in zip(cols, key)) or "all"
        yield label, out[key]


# ---------------------------------------------------------------------------
# figure kinds

def _scatter_series(ax, rows, xcol, ycol, label, floor=None):
    rows = sorted(rows, key=lambda r: float(r[xcol]))
    x = np.array([float(r[xcol]) for r in rows])
    y = np.array([float(r[ycol]) for r in rows])
    if floor is not None:
        y = np.maximum(y, floor)
    rel = np.array([_reliable(r) for r in rows])
    (line,) = ax.plot(x, y, "-", label=label)
    c = line.get_color()
    ax.plot(x[rel], y[rel], "o", color=c, mfc=c, ms=5)
    ax.plot(x[~rel], y[~rel], "o", color=c, mfc="none", ms=5)


def _ber_plot(spec, rows, xcol, xlabel):
    _require(rows, [xcol, "pre_fec_ber"], spec.inputs[0])
    fig, ax = plt.subplots()
    for label, grp in _groups(rows, spec.group):
        _scatter_series(ax, grp, xcol, "pre_fec_ber", label, floor=BER_FLOOR)
    ax.axhline(KP4_BER, color="crimson", ls="--", lw=1,
               label=f"KP4 threshold {KP4_BER:.1e}")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("pre-FEC BER")
    ax.legend(fontsize=7)
    return fig


def _air_plot(spec, rows):
    _require(rows, ["gross_gbps", "air_gbps"], spec.inputs[0])
    fig, ax = plt.subplots()
    for label, grp in _groups(rows, spec.group):
        _scatter_series(ax, grp, "gross_gbps", "air_gbps", label)
    if rows:
        g = sorted(float(r["gross_gbps"]) for r in rows)
        ax.plot([g[0], g[-1]], [g[0], g[-1]], ":", color="gray", lw=1,
                label="AIR = gross")
    ax.set_xlabel("gross bit rate (Gb/s)")
    ax.set_ylabel("AIR (Gb/s)")
    ax.legend(fontsize=7)
    return fig


def _eye_plot(spec):
    m = np.loadtxt(spec.inputs[0], delimiter=",", ndmin=2)
    fig, ax = plt.subplots()
    ax.imshow(m.T, origin="lower", aspect="auto", cmap="inferno",
              extent=(0.0, 1.0, 0.0, float(m.shape[1])))
    ax.set_xlabel("phase (UI)")
    ax.set_ylabel("amplitude bin")
    ax.grid(False)
    return fig


def _taps_plot(spec):
    path = spec.inputs[0]
    if path.endswith(".json"):
        rows = read_rows(path)
        if not rows or "vnle_linear_taps" not in rows[0].get("diagnostics", {}):
            raise FigureError(f"{path}: missing columns diagnostics.vnle_linear_taps")
        taps = np.asarray(rows[0]["diagnostics"]["vnle_linear_taps"], dtype=float)
    else:
        taps = np.loadtxt(path, delimiter=",", ndmin=1)
    fig, ax = plt.subplots()
    idx = np.arange(len(taps)) - len(taps) // 2
    ax.stem(idx, taps, basefmt="gray")
    ax.set_xlabel("tap index (relative to center)")
    ax.set_ylabel("coefficient")
    return fig


# ---------------------------------------------------------------------------
# entry point

def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    with plt.rc_context(_STYLE):
        if spec.kind == "eye":
            fig = _eye_plot(spec)
        elif spec.kind == "taps":
            fig = _taps_plot(spec)
        else:
            rows = read_rows(spec.inputs[0])
            if not rows:
                warnings.warn(f"{spec.inputs[0]}: no data rows, rendering empty plot")
            if spec.kind == "ber_vs_rate":
                fig = _ber_plot(spec, rows, "gross_gbps", "gross bit rate (Gb/s)")
            elif spec.kind == "ber_vs_oma":
                fig = _ber_plot(spec, rows, "oma_dbm", "OMA (dBm)")
            else:
                fig = _air_plot(spec, rows)
        try:
            fig.savefig(spec.out, metadata={"Software": None})
        finally:
            plt.close(fig)
    return spec.out
