# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: PRBS generation, LMS adaptation, Viterbi forward pass.

Must stay semantically identical to _kernels_py.py (the import-time fallback).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport round as c_round

cnp.import_array()


def prbs_fill(cnp.uint8_t[::1] init, int d, int p, long n):
    if n <= p:
        return np.asarray(init)[:n].copy()
    cdef long period = (1 << p) - 1
    cdef long m = min(n, period + p)
    out = np.empty(m, dtype=np.uint8)
    cdef cnp.uint8_t[::1] buf = out
    cdef long k
    for k in range(p):
        buf[k] = init[k]
    for k in range(p, m):
        buf[k] = buf[k - d] ^ buf[k - p]
    if n <= m:
        return out[:n]
    # ceil division; C integer division truncates, so spell it out
    cdef long reps = (n + period - 1) // period
    return np.tile(out[:period], reps)[:n]


def lms_run(double[::1] xp, long pad, long n, double[::1] targets, long n_known,
            double[::1] wlin, long center, double[::1] wsq, double[::1] wcr,
            double mu_lin, double mu_nl, int dd,
            double grid_lo, double grid_step, int grid_n, double[::1] y_out):
    cdef long nlin = wlin.shape[0]
    cdef long msq = wsq.shape[0]
    cdef long mcr = wcr.shape[0]
    cdef long k, j, base, w0
    cdef double y, t, e, g, v
    cdef long gi
    for k in range(n):
        base = pad + k
        w0 = base - center
        y = 0.0
        for j in range(nlin):
            y += wlin[j] * xp[w0 + j]
        for j in range(msq):
            v = xp[base - j]
            y += wsq[j] * v * v
        for j in range(mcr):
            y += wcr[j] * xp[base - j] * xp[base - j - 1]
        y_out[k] = y
        if k < n_known:
            t = targets[k]
        elif dd:
            gi = <long>c_round((y - grid_lo) / grid_step)
            if gi < 0:
                gi = 0
            elif gi >= grid_n:
                gi = grid_n - 1
            t = grid_lo + gi * grid_step
        else:
            continue
        e = t - y
        g = mu_lin * e
        for j in range(nlin):
            wlin[j] += g * xp[w0 + j]
        g = mu_nl * e
        for j in range(msq):
            v = xp[base - j]
            wsq[j] += g * v * v
        for j in range(mcr):
            wcr[j] += g * xp[base - j] * xp[base - j - 1]


def viterbi_forward(double[::1] z, double[:, ::1] targets, int init_state,
                    cnp.int8_t[:, ::1] bp_out, cnp.int8_t[::1] best_out):
    cdef int m = targets.shape[0]
    cdef long n = z.shape[0]
    cdef double[::1] pm = np.zeros(m) if init_state < 0 else np.full(m, 1e30)
    cdef double[::1] pm_new = np.empty(m)
    cdef long k
    cdef int i, j, b
    cdef double d, c, best
    if init_state >= 0:
        pm[init_state] = 0.0
    for k in range(n):
        for i in range(m):
            best = 1e300
            b = 0
            for j in range(m):
                d = z[k] - targets[j, i]
                c = pm[j] + d * d
                if c < best:
                    best = c
                    b = j
            pm_new[i] = best
            bp_out[k, i] = <cnp.int8_t>b
        b = 0
        best = pm_new[0]
        for i in range(1, m):
            if pm_new[i] < best:
                best = pm_new[i]
                b = i
        best_out[k] = <cnp.int8_t>b
        for i in range(m):
            pm[i] = pm_new[i] - best
