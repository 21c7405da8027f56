"""Numpy implementations of the hot kernels.

Every function here has a twin in ``_core.pyx`` with the same signature.
Hashing and selection agree bit for bit; floating sums may differ in the
last ulps because the summation order differs.  ``labor._kernels`` picks one
implementation at import time.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def _mix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def hash_uniform(seed, tag, domain, a, b) -> np.ndarray:
    """Keyed uniform variates in [0, 1).

    ``seed`` may be an array broadcasting against ``a``/``b``; all integer
    inputs are taken modulo 2**64.
    """
    with np.errstate(over="ignore"):
        h = _mix(np.asarray(seed, dtype=np.uint64) ^ np.uint64(domain))
        h = _mix(h ^ np.uint64(tag))
        h = _mix(h ^ np.asarray(a).astype(np.uint64))
        h = _mix(h ^ np.asarray(b).astype(np.uint64))
    return (h >> _S11).astype(np.float64) * _INV53


def solve_scale_segments(seg_ptr, pi_e, w2_e, target, saturate):
    """Per-segment solve of ``sum w2 / min(1, c*pi) = target``.

    Segments flagged in ``saturate`` (and empty ones) get ``c = max 1/pi``.
    Returns ``(c, iterations, residual)``.  The update is

        c <- c / (target - v) * (sum w2/min(1, c*pi) - v)
        v <- sum of w2 over saturated entries (c*pi >= 1)

    starting from ``v = 0`` and ``c = sum(w2/pi) / target``; it increases
    monotonically and is exact once the saturated set stops growing.
    """
    seg_ptr = np.asarray(seg_ptr, dtype=np.int64)
    pi_e = np.asarray(pi_e, dtype=np.float64)
    nseg = seg_ptr.size - 1
    deg = np.diff(seg_ptr)
    w2 = np.ones_like(pi_e) if w2_e is None else np.asarray(w2_e, dtype=np.float64)
    target = np.broadcast_to(np.asarray(target, dtype=np.float64), (nseg,))
    saturate = np.asarray(saturate, dtype=bool) | (deg == 0)

    c = np.zeros(nseg)
    iters = np.zeros(nseg, dtype=np.int64)
    residual = np.zeros(nseg)
    if nseg == 0:
        return c, iters, residual

    seg_of = np.repeat(np.arange(nseg), deg)
    nonempty = deg > 0
    starts = seg_ptr[:-1][nonempty]

    def segsum(x):
        out = np.zeros(nseg)
        if starts.size:
            out[nonempty] = np.add.reduceat(x, starts)
        return out

    min_pi = np.full(nseg, np.inf)
    if starts.size:
        min_pi[nonempty] = np.minimum.reduceat(pi_e, starts)
    c[saturate] = np.where(nonempty[saturate], 1.0 / min_pi[saturate], np.nan)

    active = ~saturate
    c[active] = segsum(w2 / pi_e)[active] / target[active]
    v = np.zeros(nseg)
    nsat_used = np.zeros(nseg, dtype=np.int64)
    max_rounds = int(deg.max()) + 2
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(max_rounds):
            if not active.any():
                break
            ce = c[seg_of] * pi_e
            lhs = segsum(w2 / np.minimum(1.0, ce))
            new_c = c / (target - v) * (lhs - v)
            new_c = np.where(active, np.maximum(new_c, c), c)
            iters += active
            c = new_c
            sat = c[seg_of] * pi_e >= 1.0
            nsat = segsum(sat.astype(np.float64)).astype(np.int64)
            v = np.where(active, segsum(np.where(sat, w2, 0.0)), v)
            done = active & (nsat == nsat_used)
            nsat_used = np.where(active, nsat, nsat_used)
            active &= ~done
        lhs = segsum(w2 / np.minimum(1.0, c[seg_of] * pi_e))
    solved = ~saturate
    residual[solved] = np.abs(lhs - target)[solved]
    return c, iters, residual


def scatter_max(index, values, size) -> np.ndarray:
    """``out[j] = max(values[index == j])``; ``-inf`` where nothing lands."""
    out = np.full(size, -np.inf)
    np.maximum.at(out, np.asarray(index, dtype=np.int64), np.asarray(values, dtype=np.float64))
    return out


def bottom_k_segments(seg_ptr, keys, ids, counts) -> np.ndarray:
    """Mask of the ``counts[j]`` smallest keys within each segment.

    Ties are broken by the smaller id.
    """
    seg_ptr = np.asarray(seg_ptr, dtype=np.int64)
    keys = np.asarray(keys, dtype=np.float64)
    deg = np.diff(seg_ptr)
    seg_of = np.repeat(np.arange(deg.size), deg)
    order = np.lexsort((np.asarray(ids), keys, seg_of))
    rank = np.empty(keys.size, dtype=np.int64)
    rank[order] = np.arange(keys.size) - np.repeat(seg_ptr[:-1], deg)
    return rank < np.repeat(np.asarray(counts, dtype=np.int64), deg)
