"""Expansiveness tests for maps and for singular suspension flows.

Both tests falsify: they look for a witness pair that violates the
definition at the scales given and report it with enough data to replay.

For flows the tracking premise allows a time change.  Time changes are
discretized as monotone lattice paths through the grid of sample times of
the two trajectories, starting at ``(0, 0)`` and moving by steps whose time
ratio lies in ``[1/4, 4]``.  The tracking distance is the least, over such
paths, of the largest chain distance at the visited cells; a bottleneck
shortest-path problem solved by dynamic programming.  Past and future are
handled by two such problems, the second on the reversed flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import _kernels
from .entropy import base_tables
from .mapping_torus import FiberPoint, MappingTorus, bar_metric
from .singular import SingularSuspension, WholeFiber
from .systems import AffineTorus, DiscreteSystem, SymbolSequence, UsageError, _ShiftBase, point_to_json

__all__ = [
    "ReparamGrid",
    "TrackingResult",
    "reparam_tracking_distance",
    "NoCounterexample",
    "Counterexample",
    "flow_expansiveness_falsifier",
    "map_expansiveness_falsifier",
    "NearPairs",
    "FiniteOK",
    "Violation",
    "Incompatible",
    "singularity_count_check",
    "DEFAULT_EPS",
    "DEFAULT_DELTA",
    "replay_flow_witness",
    "replay_map_witness",
]

DEFAULT_EPS = 0.25
DEFAULT_DELTA = 0.05
MAX_RATIO = 4
# largest single step, in time units; scaling with the grid keeps coarse paths available on finer grids
MAX_JUMP = 0.4
ARC_SAMPLES = 201


@dataclass(frozen=True)
class ReparamGrid:
    """Sample times ``0, d, 2d, ..., T`` and the admissible lattice steps."""

    T: float = 20.0
    delta_t: float = 0.1

    def __post_init__(self):
        if not (0 < self.delta_t <= self.T):
            raise UsageError("need 0 < delta_t <= T")

    @property
    def times(self) -> np.ndarray:
        k = int(round(self.T / self.delta_t))
        return np.arange(k + 1) * self.delta_t

    @property
    def steps(self) -> np.ndarray:
        m = max(1, int(round(MAX_JUMP / self.delta_t)))
        out = [(a, b) for a in range(1, m + 1) for b in range(1, m + 1)
               if a <= MAX_RATIO * b and b <= MAX_RATIO * a]
        return np.array(out, dtype=np.int64)


@dataclass
class TrackingResult:
    value: float
    truncated: bool
    forward_path: list = field(default_factory=list)
    backward_path: list = field(default_factory=list)

    def __float__(self):
        return self.value


def _trajectory_offsets(ss: SingularSuspension, p: FiberPoint, times: np.ndarray):
    m, h, trapped = ss.orbit_offsets(p, times)
    stop = int(np.argmax(trapped)) if trapped.any() else len(times)
    # the first trapped sample is the singular point itself and is still a valid sample
    return m, h, min(stop + 1, len(times)), bool(trapped.any())


def _one_sided(ss: SingularSuspension, p: FiberPoint, q: FiberPoint, grid: ReparamGrid):
    times = grid.times
    p, q = ss.torus.normalize(p), ss.torus.normalize(q)
    ma, ha, ka, ta = _trajectory_offsets(ss, p, times)
    mb, hb, kb, tb = _trajectory_offsets(ss, q, times)
    ma, ha, mb, hb = ma[:ka], ha[:ka], mb[:kb], hb[:kb]
    hi = int(max(ma.max(), mb.max())) + 3
    kind, T, F, B, off, bits = base_tables(ss.system, [p.base, q.base], -1, hi)
    C = _kernels.cost_matrix(kind, T, F, B, off, bits, ma, ha, mb, hb)
    steps = grid.steps
    V, P = _kernels.bottleneck_dp(C, steps)
    ends = [(ka - 1, j) for j in range(kb)] + [(i, kb - 1) for i in range(ka)]
    i, j = min(ends, key=lambda c: (V[c], c))
    value = float(V[i, j])
    path = [(i, j)]
    while (i, j) != (0, 0) and P[i, j] >= 0:
        s = P[i, j]
        i, j = i - int(steps[s, 0]), j - int(steps[s, 1])
        path.append((i, j))
    path.reverse()
    return value, path, ta or tb


def reparam_tracking_distance(flow: SingularSuspension, p: FiberPoint, q: FiberPoint,
                              grid: ReparamGrid | None = None) -> TrackingResult:
    """Least tracking distance of ``q`` against ``p`` over discretized time changes, on ``[-T, T]``."""
    grid = grid or ReparamGrid()
    fv, fpath, ft = _one_sided(flow, p, q, grid)
    rev = flow.reversed()
    refl = flow.torus.reflect
    bv, bpath, bt = _one_sided(rev, refl(p), refl(q), grid)
    return TrackingResult(max(fv, bv), ft or bt, fpath, bpath)


# ---------------------------------------------------------------------------
# falsifiers


@dataclass
class NoCounterexample:
    n_tested: int

    def to_json(self):
        return {"result": "NoCounterexample", "n_tested": self.n_tested}


@dataclass
class Counterexample:
    p: Any
    q: Any
    witness: dict

    def to_json(self):
        enc = lambda v: v.to_json() if isinstance(v, FiberPoint) else point_to_json(v)
        return {"result": "Counterexample", "p": enc(self.p), "q": enc(self.q), "witness": self.witness}


def _signed_offsets(ss: SingularSuspension, p: FiberPoint, times: np.ndarray):
    """``psi_t(p) = (f^m(p.base), h)`` for times of either sign; ``p`` must be normalized."""
    times = np.asarray(times, dtype=float)
    m = np.zeros(times.size, dtype=np.int64)
    h = np.zeros(times.size)
    pos = times >= 0
    if pos.any():
        order = np.flatnonzero(pos)[np.argsort(times[pos], kind="stable")]
        mm, hh, _ = ss.orbit_offsets(p, times[order])
        m[order], h[order] = mm, hh
    if (~pos).any():
        # run the reversed flow from the reflected point and reflect back
        order = np.flatnonzero(~pos)[np.argsort(-times[~pos], kind="stable")]
        rev = ss.reversed()
        q = ss.torus.reflect(p)
        mm, hh, _ = rev.orbit_offsets(q, -times[order])
        shift = 1 if p.height > 0.0 else 0  # reflect moved the base by one step
        m[order] = np.where(hh > 0.0, -mm, 1 - mm) + shift - 1
        h[order] = np.where(hh > 0.0, 1.0 - hh, 0.0)
    return m, h


def _matched_in_arc(flow, p, q, res: TrackingResult, grid: ReparamGrid, eps: float, tol: float):
    """First matched pair ``(t0, h(t0))`` whose ``q``-point lies within ``tol`` of ``psi_[t0-eps, t0+eps](p)``."""
    p, q = flow.torus.normalize(p), flow.torus.normalize(q)
    times = grid.times
    step = 2 * eps / (ARC_SAMPLES - 1)
    half = ARC_SAMPLES // 2
    span = grid.T + eps
    nfine = int(math.ceil(span / step))
    fine = np.arange(-nfine, nfine + 1) * step
    Ma, Ha = _signed_offsets(flow, p, fine)
    cells = [(i, j, 1) for i, j in res.forward_path] + [(i, j, -1) for i, j in res.backward_path]
    tq = np.array([sg * times[j] for _, j, sg in cells])
    Mb, Hb = _signed_offsets(flow, q, tq)
    centres = np.array([nfine + int(round(sg * times[i] / step)) for i, _, sg in cells], dtype=np.int64)
    lo = int(min(Ma.min(), Mb.min())) - 1
    hi = int(max(Ma.max(), Mb.max())) + 3
    kind, T, F, B, off, bits = base_tables(flow.system, [p.base, q.base], lo, hi)
    d = _kernels.arc_min(kind, T, F, B, off, bits, Ma, Ha, Mb, Hb, centres, half)
    hit = np.flatnonzero(d <= tol)
    if hit.size:
        i, j, sg = cells[int(hit[0])]
        return (sg * float(times[i]), sg * float(times[j]))
    return None


def flow_expansiveness_falsifier(flow: SingularSuspension, eps: float = DEFAULT_EPS, delta: float = DEFAULT_DELTA,
                                 pairs=None, grid: ReparamGrid | None = None, n_pairs: int = 1000,
                                 member_tol: float | None = None):
    """Search sampled pairs for a tracked pair whose orbits are not ``eps``-time shifts of each other.

    ``pairs`` yields ``(p, q)`` fiber points; by default :class:`NearPairs` on
    the base with initial distance in ``[delta / 4, delta]``.
    """
    grid = grid or ReparamGrid()
    tol = delta / 10 if member_tol is None else member_tol
    if pairs is None:
        pairs = NearPairs(flow.system, delta / 4, delta)
    tested = 0
    for p, q in pairs.pairs(n_pairs):
        tested += 1
        res = reparam_tracking_distance(flow, p, q, grid)
        if res.value > delta:
            continue
        if _matched_in_arc(flow, p, q, res, grid, eps, tol) is None:
            witness = {
                "tracking_distance": res.value,
                "truncated": res.truncated,
                "eps": eps,
                "delta": delta,
                "member_tol": tol,
                "T": grid.T,
                "delta_t": grid.delta_t,
                "pair_index": tested - 1,
            }
            return Counterexample(p, q, witness)
    return NoCounterexample(tested)


def replay_flow_witness(flow: SingularSuspension, cx: Counterexample) -> bool:
    """Recheck both inequalities a flow counterexample claims."""
    w = cx.witness
    grid = ReparamGrid(w["T"], w["delta_t"])
    res = reparam_tracking_distance(flow, cx.p, cx.q, grid)
    if res.value > w["delta"]:
        return False
    return _matched_in_arc(flow, cx.p, cx.q, res, grid, w["eps"], w["member_tol"]) is None


def map_expansiveness_falsifier(system: DiscreteSystem, e: float, pairs=None, horizon: int = 10,
                                n_pairs: int = 1000):
    """Look for distinct ``x, y`` with ``d(f^n x, f^n y) <= e`` for all ``|n| <= horizon``."""
    if horizon < 1:
        raise UsageError("horizon must be >= 1")
    if pairs is None:
        pairs = NearPairs(system, 0.0, e)
    tested = 0
    for x, y in pairs.base_pairs(n_pairs):
        tested += 1
        if x == y:
            continue
        worst = _map_worst(system, x, y, horizon)
        if worst <= e:
            return Counterexample(x, y, {"e": e, "horizon": horizon, "max_distance": worst,
                                         "pair_index": tested - 1})
    return NoCounterexample(tested)


def _map_worst(system, x, y, horizon):
    worst = system.distance(x, y)
    a, b = x, y
    for _ in range(horizon):
        a, b = system.step(a), system.step(b)
        worst = max(worst, system.distance(a, b))
    a, b = x, y
    for _ in range(horizon):
        a, b = system.step_inverse(a), system.step_inverse(b)
        worst = max(worst, system.distance(a, b))
    return worst


def replay_map_witness(system, cx: Counterexample) -> bool:
    w = cx.witness
    return cx.p != cx.q and _map_worst(system, cx.p, cx.q, w["horizon"]) <= w["e"]


class NearPairs:
    """Random pairs of distinct nearby points.

    On a torus the second point is displaced by a random vector of max-norm
    in ``[lo, hi]``.  On a shift it agrees with the first on ``[-k, k]`` and
    is independent elsewhere, with ``2^-k`` in ``[lo, hi]`` (a disagreement
    at ``k + 1`` or ``-(k + 1)`` is forced).  Heights are shared and uniform.
    """

    def __init__(self, system: DiscreteSystem, lo: float, hi: float, seed: int = 0, window: int = 64):
        self.system = system
        self.lo, self.hi = float(lo), float(hi)
        self.seed = seed
        self.window = window

    def _bases(self, n: int, rng):
        sysm = self.system
        out = []
        if isinstance(sysm, AffineTorus):
            for _ in range(n):
                x = rng.random(sysm.dim)
                r = rng.uniform(max(self.lo, 1e-9), self.hi)
                v = rng.uniform(-r, r, sysm.dim)
                v[rng.integers(sysm.dim)] = r * rng.choice((-1.0, 1.0))
                out.append((tuple(float(c) for c in x), tuple(float(c) for c in (x + v) % 1.0)))
            return out
        if isinstance(sysm, _ShiftBase):
            W = self.window
            k_min = max(0, math.ceil(-math.log2(self.hi))) if self.hi > 0 else W
            k_max = math.floor(-math.log2(self.lo)) if self.lo > 0 else W - 1
            k_max = max(k_min, min(k_max, W - 1))
            for _ in range(n):
                k = int(rng.integers(k_min, k_max + 1))
                a = rng.integers(0, sysm.k, size=2 * W + 1).astype(np.int8)
                b = rng.integers(0, sysm.k, size=2 * W + 1).astype(np.int8)
                b[W - k:W + k + 1] = a[W - k:W + k + 1]
                side = W + k + 1 if rng.random() < 0.5 else W - k - 1
                b[side] = (a[side] + 1) % sysm.k
                out.append((SymbolSequence(a, W, (0,), (0,)), SymbolSequence(b, W, (0,), (0,))))
            return out
        raise UsageError(f"no pair sampler for {sysm.kind}")

    def base_pairs(self, n: int):
        return self._bases(n, np.random.default_rng([self.seed, 0]))

    def pairs(self, n: int):
        rng = np.random.default_rng([self.seed, 1])
        bases = self._bases(n, rng)
        hs = rng.random(n)
        return [(FiberPoint(x, float(h)), FiberPoint(y, float(h))) for (x, y), h in zip(bases, hs)]


# ---------------------------------------------------------------------------
# singular sets


@dataclass
class FiniteOK:
    count: int
    min_distance: float

    def to_json(self):
        return {"result": "FiniteOK", "count": self.count, "min_distance": self.min_distance}


@dataclass
class Violation:
    pair: tuple

    def to_json(self):
        return {"result": "Violation", "pair": list(self.pair)}


@dataclass
class Incompatible:
    reason: str

    def to_json(self):
        return {"result": "Incompatible", "reason": self.reason}


def singularity_count_check(ss: SingularSuspension):
    """Count singular points and their least pairwise distance."""
    if isinstance(ss.brake.singular_set, WholeFiber):
        return Incompatible("the singular set is a whole fiber: uncountably many singularities, "
                            "so the flow cannot be expansive")
    pts = ss.singular_points()
    best = math.inf
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            d = bar_metric(ss.torus, pts[a], pts[b], hops=1)
            if d <= 0.0:
                return Violation((a, b))
            best = min(best, d)
    return FiniteOK(len(pts), best)
