"""The mapping torus of f with constant roof 1.

A point ``(x, s)`` with ``0 <= s < 1`` lives on the vertical segment over
``x``; the top of the segment is glued to the bottom of the segment over
``f(x)``.  The suspension flow moves heights at unit speed.

The metric ``bar_metric`` is a chain infimum.  Inside one fiber two points
at height ``s`` are ``(1 - s) d(x, y) + s d(f x, f y)`` apart, which is
continuous across the gluing.  Vertical moves cost their length.  A chain
alternates vertical moves with horizontal hops.  Chains here stay on the
orbit lines of the two endpoints, over the reps ``CHAIN_LO..CHAIN_HI``;
with those lines fixed, hop heights from ``{0, 1, s_p, s_q}`` suffice and
a small shortest-path problem gives the restricted infimum exactly.

The restricted value bounds the full chain infimum from above.  A chain
through a third orbit line can be shorter, so on far-apart triples the
triangle inequality can fail by a few thousandths; near pairs, which is
where entropy and tracking use the metric, are not affected in practice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .systems import (
    AffineTorus,
    DiscreteSystem,
    Product,
    SymbolSequence,
    UsageError,
    _ShiftBase,
    point_from_json,
    point_to_json,
)

__all__ = [
    "FiberPoint",
    "MappingTorus",
    "suspension_flow",
    "project",
    "bar_metric",
    "chain3",
    "rep_distances",
    "rep_distances_many",
    "fiber_metric",
]

REP_LO, REP_HI = -1, 2
# rep window of the bar_metric chain graph; near-returns f^k y ~ y up to |k| = 4 act as shortcuts
CHAIN_LO, CHAIN_HI = -2, 4
SYMBOL_WINDOW = 60


@dataclass(frozen=True)
class FiberPoint:
    """A point ``(base, height)`` of the mapping torus."""

    base: Any
    height: float = 0.0

    def to_json(self):
        return {"base": point_to_json(self.base), "height": float(self.height)}

    @classmethod
    def from_json(cls, obj):
        return cls(point_from_json(obj["base"]), float(obj.get("height", 0.0)))


class MappingTorus:
    """Mapping torus of ``system`` with roof identically 1."""

    def __init__(self, system: DiscreteSystem):
        self.system = system
        self._reversed = None

    def normalize(self, p: FiberPoint) -> FiberPoint:
        base = self.system.check_point(p.base)
        h = float(p.height)
        if 0.0 <= h < 1.0:
            return FiberPoint(base, h)
        k = math.floor(h)
        frac = h - k
        if frac >= 1.0:  # rounding of tiny negatives
            k, frac = k + 1, 0.0
        return FiberPoint(self.system.iterate(base, k), frac)

    def flow(self, t: float, p: FiberPoint) -> FiberPoint:
        if t == 0:
            return FiberPoint(self.system.check_point(p.base), float(p.height))
        return self.normalize(FiberPoint(p.base, float(p.height) + t))

    def distance(self, p: FiberPoint, q: FiberPoint, hops: int = 5) -> float:
        return bar_metric(self, p, q, hops=hops)

    def reversed(self) -> "MappingTorus":
        """Mapping torus of ``f^{-1}``; :meth:`reflect` carries this flow's past into its future."""
        if self._reversed is None:
            self._reversed = MappingTorus(self.system.inverse())
            self._reversed._reversed = self
        return self._reversed

    def reflect(self, p: FiberPoint) -> FiberPoint:
        """Isometry ``(x, s) -> (f x, 1 - s)`` (and ``(x, 0) -> (x, 0)``) onto the reversed torus."""
        p = self.normalize(p)
        if p.height == 0.0:
            return FiberPoint(p.base, 0.0)
        return FiberPoint(self.system.step(p.base), 1.0 - p.height)

    def to_json(self):
        return {"system": self.system.to_json()}


def suspension_flow(mt: MappingTorus, t: float, p: FiberPoint) -> FiberPoint:
    return mt.flow(t, p)


def project(p: FiberPoint):
    return p.base


# ---------------------------------------------------------------------------
# base distances between orbit representatives


def _orbit_points(system: DiscreteSystem, x, lo: int, hi: int) -> list:
    cur = system.iterate(x, lo)
    out = [cur]
    for _ in range(hi - lo):
        cur = system.step(cur)
        out.append(cur)
    return out


def rep_distances(system: DiscreteSystem, x, y, lo: int = REP_LO, hi: int = REP_HI + 1) -> np.ndarray:
    """``D[i - lo, j - lo] = d(f^i x, f^j y)`` for ``lo <= i, j <= hi``."""
    n = hi - lo + 1
    if isinstance(system, AffineTorus):
        X = system.orbit_table(np.asarray(x), lo, hi)[0]
        Y = system.orbit_table(np.asarray(y), lo, hi)[0]
        return system.dist_array(X[:, None, :], Y[None, :, :])
    if isinstance(system, _ShiftBase):
        R = SYMBOL_WINDOW
        a = system.symbol_table([x], lo - R, hi + R)[0]
        b = system.symbol_table([y], lo - R, hi + R)[0]
        return _symbol_rep_distances(a, b, n, R)
    if isinstance(system, Product):
        parts = [rep_distances(f, xi, yi, lo, hi) for f, xi, yi in zip(system.factors, x, y)]
        return np.maximum.reduce(parts)
    xs = _orbit_points(system, x, lo, hi)
    ys = _orbit_points(system, y, lo, hi)
    return np.array([[system.distance(a, b) for b in ys] for a in xs])


def rep_distances_many(system: DiscreteSystem, x, ys: list, lo: int = REP_LO, hi: int = REP_HI + 1) -> np.ndarray:
    """Stack of :func:`rep_distances` tables for one ``x`` against several ``ys``; shape (K, n, n)."""
    n = hi - lo + 1
    if not ys:
        return np.zeros((0, n, n))
    if isinstance(system, AffineTorus):
        X = system.orbit_table(np.asarray(x), lo, hi)[0]
        Y = system.orbit_table(np.asarray(ys, dtype=float), lo, hi)
        return system.dist_array(X[None, :, None, :], Y[:, None, :, :])
    if isinstance(system, _ShiftBase):
        R = SYMBOL_WINDOW
        a = system.symbol_table([x], lo - R, hi + R)[0]
        B = system.symbol_table(ys, lo - R, hi + R)
        order = _centre_order(R)
        out = np.zeros((len(ys), n, n))
        weights = 2.0 ** (-((np.arange(2 * R + 1) + 1) // 2))
        for i in range(n):
            wa = a[i + R + order]
            for j in range(n):
                diff = B[:, j + R + order] != wa[None, :]
                first = np.argmax(diff, axis=1)
                out[:, i, j] = np.where(diff.any(axis=1), weights[first], 0.0)
        return out
    return np.stack([rep_distances(system, x, y, lo, hi) for y in ys])


def _centre_order(R: int) -> np.ndarray:
    # offsets 0, -1, 1, -2, 2, ...; the first mismatch at column c has |offset| = (c + 1) // 2
    order = np.empty(2 * R + 1, dtype=np.int64)
    order[0] = 0
    order[1::2] = -np.arange(1, R + 1)
    order[2::2] = np.arange(1, R + 1)
    return order


def _symbol_rep_distances(a: np.ndarray, b: np.ndarray, n: int, R: int) -> np.ndarray:
    # a[c] = x_{lo - R + c}; f^i x centred at column (i - lo) + R
    order = _centre_order(R)
    D = np.zeros((n, n))
    for i in range(n):
        wa = a[i + R + order]
        for j in range(n):
            diff = wa != b[j + R + order]
            if diff.any():
                col = int(np.argmax(diff))
                D[i, j] = 2.0 ** (-((col + 1) // 2))
    return D


def fiber_metric(D: np.ndarray, s: float, i: int = 0, j: int = 0) -> float:
    """Same-fiber distance at height ``s`` between reps ``i`` and ``j`` (indices offset by ``REP_LO``)."""
    a, b = i - REP_LO, j - REP_LO
    return (1.0 - s) * D[a, b] + s * D[a + 1, b + 1]


def chain3(D: np.ndarray, h1: float, h2: float) -> float:
    """Best chain with one horizontal hop: vertical, hop, vertical.

    ``D`` is a table from :func:`rep_distances` starting at rep ``-1`` (at least 4x4).
    """
    best = np.inf
    for i in (-1, 0, 1):
        a = h1 - i
        for j in (-1, 0, 1):
            b = h2 - j
            d0 = D[i + 1, j + 1]
            d1 = D[i + 2, j + 2]
            for r in (0.0, 1.0, min(max(a, 0.0), 1.0), min(max(b, 0.0), 1.0)):
                c = abs(a - r) + abs(b - r) + (1.0 - r) * d0 + r * d1
                if c < best:
                    best = c
    return best


def _chain_graph(Dxx, Dxy, Dyy, h1, h2, hops, reps, heights):
    """Shortest chain with at most ``hops`` horizontal hops.

    Orbit lines are parametrised by absolute height ``i + r``; the tables
    ``D**`` are indexed from rep ``reps[0]`` and must cover ``reps[-1] + 1``.
    """
    lo = reps[0]
    hs = sorted(set(heights))
    # nodes on each line: absolute heights i + r
    nodes = sorted({i + r for i in reps for r in hs})
    A = np.array(nodes)
    vert = np.abs(A[:, None] - A[None, :])
    # horizontal cost between line u node a and line v node b (same fractional part)
    def hop_matrix(Duv):
        M = np.full((len(nodes), len(nodes)), np.inf)
        for i in reps:
            r = A - i
            ok_a = (r >= -1e-12) & (r <= 1 + 1e-12)
            if not ok_a.any():
                continue
            J = A[None, :] - r[:, None]
            jr = np.rint(J).astype(int)
            ok = ok_a[:, None] & (np.abs(J - jr) <= 1e-12) & (jr >= lo) & (jr <= reps[-1])
            jc = np.clip(jr, lo, reps[-1]) - lo
            c = (1 - r)[:, None] * Duv[i - lo, jc] + r[:, None] * Duv[i - lo + 1, jc + 1]
            M = np.where(ok & (c < M), c, M)
        return M

    Hxx, Hxy, Hyy = hop_matrix(Dxx), hop_matrix(Dxy), hop_matrix(Dyy)
    Hyx = hop_matrix(Dxy.T)
    dx = np.abs(A - h1)
    dy = np.full(len(nodes), np.inf)
    best = np.inf
    for _ in range(hops):
        nx = np.minimum(dx, np.min(dx[:, None] + Hxx, axis=0))
        nx = np.minimum(nx, np.min(dy[:, None] + Hyx, axis=0))
        ny = np.minimum(dy, np.min(dx[:, None] + Hxy, axis=0))
        ny = np.minimum(ny, np.min(dy[:, None] + Hyy, axis=0))
        dx = np.min(nx[:, None] + vert, axis=0)
        dy = np.min(ny[:, None] + vert, axis=0)
        best = min(best, float(np.min(dy + np.abs(A - h2))))
    return best


def bar_metric(mt: MappingTorus, p: FiberPoint, q: FiberPoint, hops: int = 5) -> float:
    """Chain-infimum distance on the mapping torus, chains of at most ``hops`` hops."""
    p, q = mt.normalize(p), mt.normalize(q)
    if _order_key(q) < _order_key(p):
        # fixed argument order makes the result exactly symmetric in floating point
        p, q = q, p
    sys = mt.system
    if hops <= 1:
        Dxy = rep_distances(sys, p.base, q.base)
        return float(min(chain3(Dxy, p.height, q.height), _same_line(p, q, Dxy)))
    lo, hi = CHAIN_LO, CHAIN_HI + 1
    Dxy = rep_distances(sys, p.base, q.base, lo, hi)
    Dxx = rep_distances(sys, p.base, p.base, lo, hi)
    Dyy = rep_distances(sys, q.base, q.base, lo, hi)
    reps = list(range(CHAIN_LO, CHAIN_HI + 1))
    d = _chain_graph(Dxx, Dxy, Dyy, p.height, q.height, hops, reps, [0.0, 1.0, p.height, q.height])
    return float(min(d, _same_line(p, q, Dxy, CHAIN_LO)))


def _order_key(p: FiberPoint):
    return (p.height, repr(point_to_json(p.base)))


def _same_line(p: FiberPoint, q: FiberPoint, Dxy: np.ndarray, lo: int = REP_LO) -> float:
    # q on the orbit line of p: pure vertical move
    best = np.inf
    for k in range(lo, lo + Dxy.shape[0] - 1):
        if Dxy[k - lo, -lo] == 0.0:
            best = min(best, abs(p.height - (q.height + k)))
    return best
