"""Pure-Python/numpy fallback for the hot kernels.

Semantics must match the compiled extension bit for bit; see tests/test_kernels.py.
"""
from __future__ import annotations

import numpy as np


def prbs_fill(init: np.ndarray, d: int, p: int, n: int) -> np.ndarray:
    """Fill n bits of the LFSR recurrence a[k] = a[k-d] ^ a[k-p], seeded with init."""
    if n <= p:
        return init[:n].copy()
    period = (1 << p) - 1
    m = min(n, period + p)
    buf = np.empty(m, dtype=np.uint8)
    buf[:p] = init
    k = p
    while k < m:
        step = min(d, m - k)
        buf[k:k + step] = buf[k - d:k - d + step] ^ buf[k - p:k - p + step]
        k += step
    if n <= m:
        return buf[:n]
    reps = -(-n // period)
    return np.tile(buf[:period], reps)[:n]


def lms_run(xp, pad, n, targets, n_known, wlin, center, wsq, wcr,
            mu_lin, mu_nl, dd, grid_lo, grid_step, grid_n, y_out):
    """Sequential LMS over a Volterra feature set (linear + diagonal second order).

    xp is the input padded with `pad` zeros on each side; symbol k sees the
    linear window xp[pad+k-center : pad+k-center+len(wlin)] and the nonlinear
    memory xp[pad+k], xp[pad+k-1], ... (most recent len(wsq) samples).
    """
    nlin = len(wlin)
    msq = len(wsq)
    mcr = len(wcr)
    for k in range(n):
        base = pad + k
        win = xp[base - center:base - center + nlin]
        recent = xp[base - msq + 1:base + 1][::-1]       # x[k], x[k-1], ...
        sq = recent * recent
        cr = recent[:mcr] * recent[1:mcr + 1]
        y = win @ wlin + sq @ wsq + cr @ wcr
        y_out[k] = y
        if k < n_known:
            t = targets[k]
        elif dd:
            g = int(round((y - grid_lo) / grid_step))
            g = 0 if g < 0 else (grid_n - 1 if g >= grid_n else g)
            t = grid_lo + g * grid_step
        else:
            continue
        e = t - y
        wlin += (mu_lin * e) * win
        wsq += (mu_nl * e) * sq
        wcr += (mu_nl * e) * cr


def viterbi_forward(z, targets, init_state, bp_out, best_out):
    """Viterbi forward pass over an M-state trellis.

    targets[j, i] is the expected observation for the transition from state j
    to state i.  bp_out[k, i] receives the surviving predecessor of state i at
    step k; best_out[k] the state with minimal metric after step k.  Ties go to
    the smaller index.  init_state < 0 means all starting states equally likely.
    """
    m = targets.shape[0]
    if init_state < 0:
        pm = np.zeros(m)
    else:
        pm = np.full(m, 1e30)
        pm[init_state] = 0.0
    n = len(z)
    for k in range(n):
        cand = pm[:, None] + (z[k] - targets) ** 2
        bp = np.argmin(cand, axis=0)
        bp_out[k] = bp
        pm = cand[bp, np.arange(m)]
        b = int(np.argmin(pm))
        best_out[k] = b
        pm -= pm[b]
