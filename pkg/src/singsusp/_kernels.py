"""Compiled inner loops for separated-set counting and chain distances."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _circle(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


@njit(cache=True, nogil=True)
def chain3_kernel(D, h1, h2):
    """Single-hop chain distance; ``D`` indexed from rep -1 (see ``mapping_torus.chain3``)."""
    best = np.inf
    for i in range(-1, 2):
        a = h1 - i
        for j in range(-1, 2):
            b = h2 - j
            d0 = D[i + 1, j + 1]
            d1 = D[i + 2, j + 2]
            ra = min(max(a, 0.0), 1.0)
            rb = min(max(b, 0.0), 1.0)
            for c in range(4):
                if c == 0:
                    r = 0.0
                elif c == 1:
                    r = 1.0
                elif c == 2:
                    r = ra
                else:
                    r = rb
                v = abs(a - r) + abs(b - r) + (1.0 - r) * d0 + r * d1
                if v < best:
                    best = v
    return best


@njit(cache=True, nogil=True)
def greedy_map_torus(X, n, eps):
    """Greedy (n, eps)-separated count; ``X[a, t]`` is ``f^t`` of sample ``a`` (max-circle metric)."""
    N = X.shape[0]
    dim = X.shape[2]
    kept = np.empty(N, dtype=np.int64)
    nk = 0
    for a in range(N):
        ok = True
        for q in range(nk):
            b = kept[q]
            sep = False
            for t in range(n + 1):
                dmax = 0.0
                for c in range(dim):
                    d = _circle(X[a, t, c], X[b, t, c])
                    if d > dmax:
                        dmax = d
                if dmax > eps:
                    sep = True
                    break
            if not sep:
                ok = False
                break
        if ok:
            kept[nk] = a
            nk += 1
    return nk


@njit(cache=True, nogil=True)
def _torus_reps(T, a, ma, b, mb, off, D):
    dim = T.shape[2]
    for i in range(5):
        for j in range(5):
            dmax = 0.0
            for c in range(dim):
                d = _circle(T[a, ma + i - 1 + off, c], T[b, mb + j - 1 + off, c])
                if d > dmax:
                    dmax = d
            D[i, j] = dmax


@njit(cache=True, nogil=True)
def _ctz(v):
    c = 0
    while (v & 1) == 0:
        v >>= 1
        c += 1
    return c


@njit(cache=True, nogil=True)
def _sym_dist(F, B, a, ma, b, mb, bits):
    """Shift distance between ``f^ma`` of sample a and ``f^mb`` of sample b from packed half-windows."""
    xf = F[a, ma] ^ F[b, mb]
    xb = B[a, ma] ^ B[b, mb]
    k = 1 << 30
    if xf != 0:
        k = _ctz(xf) // bits
    if xb != 0:
        kb = _ctz(xb) // bits + 1
        if kb < k:
            k = kb
    if k == (1 << 30):
        return 0.0
    return 2.0 ** (-k)


@njit(cache=True, nogil=True)
def _sym_reps(F, B, a, ma, b, mb, off, bits, D):
    for i in range(5):
        for j in range(5):
            D[i, j] = _sym_dist(F, B, a, ma + i - 1 + off, b, mb + j - 1 + off, bits)


@njit(cache=True, nogil=True)
def flow_pair_distance(kind, T, F, B, off, bits, a, ma, ha, b, mb, hb):
    D = np.empty((5, 5))
    if kind == 0:
        _torus_reps(T, a, ma, b, mb, off, D)
    else:
        _sym_reps(F, B, a, ma, b, mb, off, bits, D)
    return chain3_kernel(D, ha, hb)


@njit(cache=True, nogil=True)
def greedy_flow(kind, T, F, B, off, bits, M, H, n, eps):
    """Greedy separated count for a flow's time-one map under the single-hop chain metric.

    ``M[a, k], H[a, k]`` locate the k-th time-one iterate of sample ``a`` as
    ``(f^M(x_a), H)``; ``kind`` 0 uses torus orbit tables ``T``, 1 uses packed
    symbol half-windows ``F, B``.
    """
    N = M.shape[0]
    kept = np.empty(N, dtype=np.int64)
    D = np.empty((5, 5))
    nk = 0
    for a in range(N):
        ok = True
        for q in range(nk):
            b = kept[q]
            sep = False
            for t in range(n + 1):
                if kind == 0:
                    _torus_reps(T, a, M[a, t], b, M[b, t], off, D)
                else:
                    _sym_reps(F, B, a, M[a, t], b, M[b, t], off, bits, D)
                if chain3_kernel(D, H[a, t], H[b, t]) > eps:
                    sep = True
                    break
            if not sep:
                ok = False
                break
        if ok:
            kept[nk] = a
            nk += 1
    return nk


@njit(cache=True, nogil=True)
def pack_half_windows(W, lo, m_lo, m_hi, R, bits):
    """Packed forward/backward half-windows of ``f^m`` for ``m_lo <= m <= m_hi``.

    ``W[a, c]`` is the symbol at index ``lo + c``.  Column ``m - m_lo`` of the
    outputs packs symbols ``m .. m + R - 1`` (forward) and ``m - 1 .. m - R``
    (backward), first symbol in the low bits.
    """
    N = W.shape[0]
    K = m_hi - m_lo + 1
    F = np.zeros((N, K), dtype=np.int64)
    B = np.zeros((N, K), dtype=np.int64)
    for a in range(N):
        for k in range(K):
            m = m_lo + k
            f = 0
            bb = 0
            for t in range(R):
                f |= np.int64(W[a, m + t - lo]) << (bits * t)
                bb |= np.int64(W[a, m - 1 - t - lo]) << (bits * t)
            F[a, k] = f
            B[a, k] = bb
    return F, B


@njit(cache=True, nogil=True)
def cost_matrix(kind, T, F, B, off, bits, Ma, Ha, Mb, Hb):
    """Single-hop chain distances between trajectory samples of rows 0 and 1 of the tables."""
    K1 = Ma.shape[0]
    K2 = Mb.shape[0]
    C = np.empty((K1, K2))
    D = np.empty((5, 5))
    for i in range(K1):
        for j in range(K2):
            if kind == 0:
                _torus_reps(T, 0, Ma[i], 1, Mb[j], off, D)
            else:
                _sym_reps(F, B, 0, Ma[i], 1, Mb[j], off, bits, D)
            C[i, j] = chain3_kernel(D, Ha[i], Hb[j])
    return C


@njit(cache=True, nogil=True)
def bottleneck_dp(C, steps):
    """Min over monotone lattice paths from (0, 0) of the max cost at visited cells.

    Paths move by the rows of ``steps`` and may stop on any cell of the last
    row or last column.  Returns the value table and back-pointers.
    """
    K1, K2 = C.shape
    V = np.full((K1, K2), np.inf)
    P = np.full((K1, K2), -1, dtype=np.int64)
    V[0, 0] = C[0, 0]
    for i in range(K1):
        for j in range(K2):
            if i == 0 and j == 0:
                continue
            best = np.inf
            arg = -1
            for s in range(steps.shape[0]):
                pi = i - steps[s, 0]
                pj = j - steps[s, 1]
                if pi < 0 or pj < 0:
                    continue
                if V[pi, pj] < best:
                    best = V[pi, pj]
                    arg = s
            if arg >= 0:
                V[i, j] = max(best, C[i, j])
                P[i, j] = arg
    return V, P


@njit(cache=True, nogil=True)
def arc_min(kind, T, F, B, off, bits, Ma, Ha, Mb, Hb, centres, half):
    """For each cell c: min over ``|k - centres[c]| <= half`` of the distance from row-0 sample k to row-1 sample c."""
    n = Mb.shape[0]
    K = Ma.shape[0]
    out = np.full(n, np.inf)
    D = np.empty((5, 5))
    for c in range(n):
        lo = max(0, centres[c] - half)
        hi = min(K - 1, centres[c] + half)
        for k in range(lo, hi + 1):
            if kind == 0:
                _torus_reps(T, 0, Ma[k], 1, Mb[c], off, D)
            else:
                _sym_reps(F, B, 0, Ma[k], 1, Mb[c], off, bits, D)
            v = chain3_kernel(D, Ha[k], Hb[c])
            if v < out[c]:
                out[c] = v
    return out


@njit(cache=True, nogil=True)
def chain_lines(D, hs, ua, ub):
    """Values at ``ua`` and ``ub`` of every single-hop chain candidate (see ``singular._chain_lines``)."""
    K = hs.shape[0]
    va = np.empty(K * 36)
    vb = np.empty(K * 36)
    for side in range(2):
        u = ua if side == 0 else ub
        out = va if side == 0 else vb
        c = 0
        for i in range(-1, 2):
            a = u - i
            ra = min(max(a, 0.0), 1.0)
            for j in range(-1, 2):
                for choice in range(4):
                    for k in range(K):
                        b = hs[k] - j
                        if choice == 0:
                            r = 0.0
                        elif choice == 1:
                            r = 1.0
                        elif choice == 2:
                            r = ra
                        else:
                            r = min(max(b, 0.0), 1.0)
                        d0 = D[k, i + 1, j + 1]
                        d1 = D[k, i + 2, j + 2]
                        out[c] = abs(a - r) + abs(b - r) + (1.0 - r) * d0 + r * d1
                        c += 1
    return va, vb
