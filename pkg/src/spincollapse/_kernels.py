"""Compiled inner loops.

All kernels work on a Hamiltonian stored as

* ``diag``: the real diagonal of every z-z term, one entry per basis word;
* flip pairs ``(bi, bj, w_same, w_diff)``: each x-x / y-y pair flips bits
  ``bi`` and ``bj`` with amplitude ``w_same`` when the two bits agree and
  ``w_diff`` when they differ;
* an optional field term ``field_coef * (popcount(b & amask) - n_app / 2)``.

Every matrix element is real, so complex vectors are processed as
interleaved float64 pairs.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True, inline="always")
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@nb.njit(cache=True)
def build_diagonal(n_sites, zi, zj, zc):
    n = 1 << n_sites
    diag = np.zeros(n)
    for b in range(n):
        acc = 0.0
        for p in range(zi.shape[0]):
            if ((b >> zi[p]) ^ (b >> zj[p])) & 1:
                acc -= zc[p]
            else:
                acc += zc[p]
        diag[b] = 0.25 * acc
    return diag


@nb.njit(cache=True)
def matvec(psi_c, out_c, diag, field_coef, amask, half_app, gstart, glow, hi, ws, wd):
    """out = H psi.  ``psi`` and ``out`` must not alias.

    Flip pairs are sorted by their lower bit: group ``g`` holds pairs
    ``gstart[g]:gstart[g+1]``, all with lower bit ``glow[g]`` and upper bits
    ``hi[...]``.  For a fixed lower bit the output is swept in contiguous
    runs of ``2**low`` words, and every pair of the group is applied to a run
    while it is still in cache.  Indices are unsigned so the inner loop
    vectorises.
    """
    u = nb.uint64
    psi = psi_c.view(np.float64)
    out = out_c.view(np.float64)
    n = psi_c.shape[0]
    for b in range(n):
        h = diag[b] + field_coef * (_popcount(b & amask) - half_app)
        out[2 * b] = h * psi[2 * b]
        out[2 * b + 1] = h * psi[2 * b + 1]
    for g in range(glow.shape[0]):
        low = glow[g]
        run = u(2 << low)
        nblk = n >> (low + 1)
        for k in range(nblk):
            b0 = u(k << (low + 1))
            o0 = u(2) * b0
            for p in range(gstart[g], gstart[g + 1]):
                j = u(hi[p])
                if (b0 >> j) & u(1):
                    w0 = wd[p]
                    w1 = ws[p]
                else:
                    w0 = ws[p]
                    w1 = wd[p]
                src0 = o0 ^ (u(2) << j)
                for t in range(run):
                    tt = u(t)
                    out[o0 + tt] += w0 * psi[src0 + run + tt]
                    out[o0 + run + tt] += w1 * psi[src0 + tt]


@nb.njit(cache=True)
def app_field_expectation(psi_c, amask, half_app):
    """sum_b |psi_b|^2 (popcount(b & amask) - half_app)."""
    psi = psi_c.view(np.float64)
    acc = 0.0
    for b in range(psi_c.shape[0]):
        w = psi[2 * b] * psi[2 * b] + psi[2 * b + 1] * psi[2 * b + 1]
        acc += w * (_popcount(b & amask) - half_app)
    return acc


@nb.njit(cache=True)
def diagonal_expectation(psi_c, diag):
    psi = psi_c.view(np.float64)
    acc = 0.0
    for b in range(psi_c.shape[0]):
        acc += diag[b] * (psi[2 * b] * psi[2 * b] + psi[2 * b + 1] * psi[2 * b + 1])
    return acc


@nb.njit(cache=True)
def flip_pair_expectation(psi_c, i, j, s, d):
    """Re <psi| F |psi> for one flip pair with weights ``(s, d)``."""
    psi = psi_c.view(np.float64)
    m = (1 << i) | (1 << j)
    acc = 0.0
    for b in range(psi_c.shape[0]):
        c = b ^ m
        w = d if ((b >> i) ^ (b >> j)) & 1 else s
        acc += w * (psi[2 * b] * psi[2 * c] + psi[2 * b + 1] * psi[2 * c + 1])
    return acc


@nb.njit(cache=True)
def chebyshev_update(hv_c, prev_c, acc_c, inv_range, cr, ci):
    """Three-term recurrence plus accumulation, in one pass.

    On entry ``hv = H T_k psi`` and ``prev = T_{k-1} psi``.  On exit
    ``prev = T_{k+1} psi = 2 H/R T_k psi - T_{k-1} psi`` and
    ``acc += (cr + i ci) T_{k+1} psi``.
    """
    hv = hv_c.view(np.float64)
    prev = prev_c.view(np.float64)
    acc = acc_c.view(np.float64)
    for b in range(hv_c.shape[0]):
        re = 2.0 * inv_range * hv[2 * b] - prev[2 * b]
        im = 2.0 * inv_range * hv[2 * b + 1] - prev[2 * b + 1]
        prev[2 * b] = re
        prev[2 * b + 1] = im
        acc[2 * b] += cr * re - ci * im
        acc[2 * b + 1] += cr * im + ci * re
