"""Topological entropy from (n, eps)-separated sets.

Counts come from greedy maximal separated subsets of a sample cloud, a
lower bound for the true separated cardinality.  Entropy is read off as
the growth rate of ``log S(n, eps)`` in ``n`` over the range where the
sample cloud is not yet exhausted.

Shift spaces have an exact shortcut: two points are (n, 2^-j)-separated iff
they differ somewhere on indices ``-(j-1) .. n + j - 1``, so the greedy
count equals the number of distinct words the sample shows on that window.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .mapping_torus import FiberPoint
from .systems import AffineTorus, DiscreteSystem, Product, SymbolSequence, UsageError, _ShiftBase

__all__ = [
    "separated_count",
    "EntropyEstimate",
    "SlopeFit",
    "CylinderSampler",
    "entropy_estimate_map",
    "entropy_estimate_flow",
    "fit_slopes",
    "DEFAULT_EPS",
]

DEFAULT_EPS = tuple(2.0 ** -j for j in range(2, 7))
# cells whose count exceeds this fraction of the sample size are treated as saturated
SATURATION = 1.0 / 8.0
SYMBOL_RESOLUTION = 20


def separated_count(points: Sequence, iterate: Callable, metric: Callable, n: int, eps: float) -> int:
    """Size of a greedy maximal (n, eps)-separated subset of ``points``.

    A point is kept when, against every point kept so far, some iterate
    ``0 <= t <= n`` puts the two more than ``eps`` apart.
    """
    if not points:
        raise UsageError("separated_count needs at least one point")
    orbits = []
    for p in points:
        orb = [p]
        for _ in range(n):
            orb.append(iterate(orb[-1]))
        orbits.append(orb)
    kept: list[list] = []
    for orb in orbits:
        if all(any(metric(orb[t], other[t]) > eps for t in range(n + 1)) for other in kept):
            kept.append(orb)
    return len(kept)


class CylinderSampler:
    """Every word of a shift on the window each (n, eps) cell looks at (exhaustive cylinders)."""

    kind = "Cylinders"

    def __init__(self, k: int = 2, max_words: int = 1 << 22):
        self.k = k
        self.max_words = max_words

    def words(self, length: int) -> np.ndarray | None:
        if self.k ** length > self.max_words:
            return None
        grids = np.indices((self.k,) * length).reshape(length, -1).T
        return np.ascontiguousarray(grids, dtype=np.int8)

    def to_json(self):
        return {"kind": self.kind, "k": self.k}


@dataclass
class SlopeFit:
    eps: float
    slope: float
    stderr: float
    n_window: tuple[int, int] | None

    def to_json(self):
        return {"eps": self.eps, "slope": self.slope, "stderr": self.stderr,
                "n_window": None if self.n_window is None else list(self.n_window)}


@dataclass
class EntropyEstimate:
    """Counts table, per-eps slope fits and the headline (max slope)."""

    counts: dict[tuple[int, float], int]
    sample_size: int
    fits: list[SlopeFit]
    headline: float
    inconclusive: bool = False
    saturated: list[tuple[int, float]] = field(default_factory=list)

    def ns(self) -> list[int]:
        return sorted({n for n, _ in self.counts})

    def epss(self) -> list[float]:
        return sorted({e for _, e in self.counts}, reverse=True)

    def curve(self, eps: float) -> tuple[np.ndarray, np.ndarray]:
        ns = [n for n in self.ns() if (n, eps) in self.counts]
        return np.array(ns), np.log([self.counts[(n, eps)] for n in ns])

    def tail_slope(self, k: int = 3) -> float:
        """Largest slope of ``log S`` over the last ``k`` n-values, over all eps."""
        out = 0.0
        for e in self.epss():
            ns, lc = self.curve(e)
            if len(ns) >= 2:
                out = max(out, float(np.polyfit(ns[-k:], lc[-k:], 1)[0]))
        return out

    def check_monotone(self) -> bool:
        ns, es = self.ns(), self.epss()
        for n in ns:
            row = [self.counts[(n, e)] for e in es if (n, e) in self.counts]
            if any(b < a for a, b in zip(row, row[1:])):  # eps decreasing -> counts grow
                return False
        for e in es:
            col = [self.counts[(n, e)] for n in ns if (n, e) in self.counts]
            if any(b < a for a, b in zip(col, col[1:])):
                return False
        return True

    def to_json(self) -> dict[str, Any]:
        return {
            "headline": self.headline,
            "inconclusive": self.inconclusive,
            "sample_size": self.sample_size,
            "fits": [f.to_json() for f in self.fits],
            "counts": [
                {"n": n, "eps": e, "count": c, "log_count": math.log(c)}
                for (n, e), c in sorted(self.counts.items(), key=lambda kv: (-kv[0][1], kv[0][0]))
            ],
        }

    def to_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("n\teps\tcount\tlog_count\n")
        for row in self.to_json()["counts"]:
            buf.write(f"{row['n']}\t{row['eps']:.10g}\t{row['count']}\t{row['log_count']:.10g}\n")
        return buf.getvalue()


def _is_linear(lc: np.ndarray, slope: float, steps=1) -> bool:
    inc = np.diff(lc) / steps
    return bool(np.all(np.abs(inc - slope) <= 0.1 * abs(slope) + 0.02))


def fit_slopes(counts: dict[tuple[int, float], int], sample_size: int,
               saturation: float = SATURATION) -> tuple[list[SlopeFit], float, bool, list]:
    """Per-eps slope of ``log S`` against ``n`` over a tail window.

    The window ends at the largest unsaturated ``n`` and extends towards
    smaller ``n`` while its log-count increments stay within 10% of linear.
    Anchoring at the tail keeps sub-exponential growth (whose log-slope
    decays with ``n``) from being read at its steepest point.
    """
    limit = saturation * sample_size
    saturated = [key for key, c in counts.items() if c > limit]
    fits = []
    for e in sorted({e for _, e in counts}, reverse=True):
        grid = sorted(n for n, ee in counts if ee == e)
        ns = []
        for n in grid:  # unsaturated prefix of the grid
            if counts[(n, e)] > limit:
                break
            ns.append(n)
        if len(ns) < 2:
            fits.append(SlopeFit(e, 0.0, math.inf, None))
            continue
        lc_all = np.log([counts[(n, e)] for n in ns])
        best = None
        for i in range(len(ns) - 2, -1, -1):
            run, lc = ns[i:], lc_all[i:]
            if len(run) >= 3:
                res = stats.linregress(run, lc)
                slope, se = float(res.slope), float(res.stderr)
            else:
                slope, se = float(lc[-1] - lc[0]) / (run[-1] - run[0]), math.inf
            if not _is_linear(lc, slope, np.diff(run)):
                break
            best = (slope, se, (run[0], run[-1]))
        if best is None:
            fits.append(SlopeFit(e, 0.0, math.inf, None))
        else:
            fits.append(SlopeFit(e, max(best[0], 0.0), best[1], best[2]))
    usable = [f for f in fits if f.n_window is not None]
    headline = max((f.slope for f in usable), default=0.0)
    return fits, headline, not usable, saturated


def _window_radius(eps: float) -> int:
    """``j`` with ``d > eps`` iff the first disagreement has ``|i| <= j - 1`` (shift metric)."""
    return max(int(math.ceil(-math.log2(eps) - 1e-12)), 1)


def _symbolic_counts(W: np.ndarray, lo: int, n: int, eps: float) -> int:
    """Distinct words of the sample rows on the window an (n, eps) cell sees."""
    j = _window_radius(eps)
    a, b = -(j - 1) - lo, n + j - 1 - lo
    sub = np.ascontiguousarray(W[:, a:b + 1])
    return int(np.unique(sub.view(np.dtype((np.void, sub.shape[1]))).ravel()).size)


def _sample_points(sampler, n_samples: int):
    if isinstance(sampler, (list, tuple)):
        return list(sampler)
    return sampler.sample(n_samples)


def entropy_estimate_map(system: DiscreteSystem, sampler, n_grid: Sequence[int] = range(2, 11),
                         eps_grid: Sequence[float] = DEFAULT_EPS, n_samples: int = 1 << 14,
                         workers: int = 1, saturation: float = SATURATION) -> EntropyEstimate:
    """Separated-set entropy estimate of a map from a sample cloud.

    ``sampler`` is a measure sampler, an explicit list of points, or a
    :class:`CylinderSampler` (shifts only; every cell sees all words on its
    window, so its sample size is the number of such words).
    """
    cells = [(n, e) for e in eps_grid for n in n_grid]
    if not cells:
        raise UsageError("grids must be nonempty")
    if isinstance(system, Product) and system.as_affine() is not None:
        system = system.as_affine()
    if isinstance(sampler, CylinderSampler):
        if not isinstance(system, _ShiftBase):
            raise UsageError("cylinder sampling needs a shift")

        def cell(n, e):
            L = n + 2 * _window_radius(e) - 1
            words = sampler.words(L)
            if words is None:
                return None
            return int(np.unique(words.view(np.dtype((np.void, L))).ravel()).size)

        counts = _collect(cells, cell, workers)
        # every cell is exhaustive, so no sampling cap applies
        fits, head, inconc, sat = fit_slopes(counts, math.inf, saturation)
        return EntropyEstimate(counts, 0, fits, head, inconc, sat)
    pts = _sample_points(sampler, n_samples)
    N = len(pts)
    if isinstance(system, AffineTorus):
        if pts and isinstance(pts[0][0], tuple):
            pts = [sum(p, ()) for p in pts]  # product points -> block coordinates
        X = system.orbit_table(np.asarray(pts, dtype=float), 0, max(n_grid))
        limit = saturation * N
        fn = lambda n, e: _cap(_kernels.greedy_map_torus(X, n, e), limit)
    elif isinstance(system, _ShiftBase):
        jmax = max(_window_radius(e) for e in eps_grid)
        lo = -(jmax - 1)
        W = system.symbol_table(pts, lo, max(n_grid) + jmax - 1)
        limit = saturation * N
        fn = lambda n, e: _cap(_symbolic_counts(W, lo, n, e), limit)
    else:
        limit = saturation * N
        fn = lambda n, e: _cap(separated_count(pts, system.step, system.distance, n, e), limit)
    counts = _collect(cells, fn, workers)
    fits, head, inconc, sat = fit_slopes(counts, N, saturation)
    return EntropyEstimate(counts, N, fits, head, inconc, sat)


class _Saturated(int):
    """A count that crossed the saturation limit; later n for the same eps are skipped."""


def _cap(c: int, limit: float):
    return _Saturated(c) if c > limit else c


def _collect(cells, fn, workers):
    """Evaluate ``fn(n, eps)`` per eps column in increasing n, stopping a column at saturation."""
    out = {}
    by_eps: dict[float, list[int]] = {}
    for n, e in cells:
        by_eps.setdefault(e, []).append(n)

    def column(e):
        res = {}
        for n in sorted(by_eps[e]):
            c = fn(n, e)
            if c is None:
                break
            res[(n, e)] = int(c)
            if isinstance(c, _Saturated):
                break
        return res

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            for res in ex.map(column, list(by_eps)):
                out.update(res)
    else:
        for e in by_eps:
            out.update(column(e))
    return out


def _flow_tables(ss, bases: list, n_max: int):
    """Orbit data for the time-one samples: offsets/heights plus base tables for the kernel."""
    N = len(bases)
    M = np.zeros((N, n_max + 1), dtype=np.int64)
    H = np.zeros((N, n_max + 1))
    times = np.arange(n_max + 1, dtype=float)
    for a, x in enumerate(bases):
        m, h, _ = ss.orbit_offsets(FiberPoint(x, 0.0), times)
        M[a], H[a] = m, h
    kind, T, F, B, off, bits = base_tables(ss.system, bases, -1, int(M.max()) + 3)
    return kind, T, F, B, off, bits, M, H


def base_tables(system, bases: list, m_lo: int, m_hi: int):
    """Kernel-ready orbit data of ``bases`` for iterates ``m_lo..m_hi``.

    Returns ``(kind, T, F, B, off, bits)``: kind 0 carries a torus orbit table
    ``T``, kind 1 packed symbol half-windows ``F, B``; ``off`` shifts iterate
    indices to table columns.
    """
    if isinstance(system, Product) and system.as_affine() is not None:
        system = system.as_affine()
        bases = [np.concatenate([np.atleast_1d(b) for b in x]) for x in bases]
    if isinstance(system, AffineTorus):
        T = system.orbit_table(np.asarray(bases, dtype=float), m_lo, m_hi)
        return 0, T, np.zeros((1, 1), np.int64), np.zeros((1, 1), np.int64), -m_lo, 1
    if isinstance(system, _ShiftBase):
        R = SYMBOL_RESOLUTION
        bits = max(1, int(math.ceil(math.log2(system.k))))
        if R * bits > 62:
            R = 62 // bits
        lo = m_lo - R
        W = system.symbol_table(bases, lo, m_hi + R)
        F, B = _kernels.pack_half_windows(W, lo, m_lo, m_hi, R, bits)
        return 1, np.zeros((1, 1, 1)), F, B, -m_lo, bits
    raise UsageError(f"kernel tables need a torus or shift base, got {system.kind}")


def entropy_estimate_flow(ss, sampler, T_grid: Sequence[int] = range(2, 11),
                          eps_grid: Sequence[float] = DEFAULT_EPS, n_samples: int = 1 << 12,
                          workers: int = 1, saturation: float = SATURATION) -> EntropyEstimate:
    """Entropy of the time-one map of a (singular) suspension under the chain metric.

    Samples start on the zero fiber ``M x {0}``; counts are therefore lower
    bounds for separated sets of the whole mapping torus.
    """
    cells = [(n, e) for e in eps_grid for n in T_grid]
    if not cells:
        raise UsageError("grids must be nonempty")
    bases = _sample_points(sampler, n_samples)
    N = len(bases)
    kind, T, F, B, off, bits, M, H = _flow_tables(ss, bases, max(T_grid))
    limit = saturation * N
    fn = lambda n, e: _cap(_kernels.greedy_flow(kind, T, F, B, off, bits, M, H, n, e), limit)
    counts = _collect(cells, fn, workers)
    fits, head, inconc, sat = fit_slopes(counts, N, saturation)
    return EntropyEstimate(counts, N, fits, head, inconc, sat)
