"""Brakes, the slowed-down suspension flow and its traversal times.

A brake ``alpha`` vanishes exactly on a compact set ``S`` of the mapping
torus.  The singular suspension ``psi`` runs along the same orbits as the
suspension flow ``phi`` but at speed ``alpha``: following ``phi`` for
``phi``-time ``s`` from ``p`` costs

    clock(p, s) = integral_0^s du / alpha(phi_u(p))

units of ``psi``-time.  Near ``S`` the speed drops to zero, so fibers that
meet ``S`` are never crossed and ``psi`` freezes on ``S``.

The clock is computed exactly.  Along one fiber the distance to a finite
singular set is the lower envelope of finitely many linear functions of the
height (one per chain candidate), so it is piecewise linear with computable
vertices, and each profile ``g`` has a closed-form antiderivative of ``1/g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Sequence

import numpy as np
from scipy import optimize, special

from . import _kernels
from .mapping_torus import REP_LO, FiberPoint, MappingTorus, rep_distances_many
from .systems import AffineTorus, DiscreteSystem, Product, SymbolSequence, UsageError, _ShiftBase

__all__ = [
    "Power",
    "Exponential",
    "PointList",
    "OrbitClosure",
    "WholeFiber",
    "Brake",
    "SingularSuspension",
    "ClockResult",
    "NumericalError",
    "DomainError",
    "alpha_eval",
    "clock",
    "psi_flow",
    "psi_trajectory",
    "gamma",
    "expected_gamma",
    "Finite",
    "DivergenceSuspected",
    "a_sing_sample",
    "ASingSample",
    "lift_integral",
    "LebesgueOnBase",
    "ErgodicAlongOrbit",
    "UniformOnSubshift",
    "sampler_from_json",
]

ZERO_TOL = 1e-14
# relative width below which a linear piece of r is treated as constant
FLAT_REL = 1e-6


class NumericalError(RuntimeError):
    """Quadrature or root finding failed; ``diagnostics`` holds the bracket."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DomainError(ValueError):
    """A precondition on the measure or brake is violated."""


# ---------------------------------------------------------------------------
# decay profiles


@dataclass(frozen=True)
class Power:
    """``g(r) = (min(r, R) / R)^k``; with the default ``R = 1`` this is ``r^k`` on the torus."""

    k: float
    radius: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise UsageError("power profile needs k > 0")

    def g(self, r):
        r = np.minimum(np.asarray(r, dtype=float), self.radius)
        return (r / self.radius) ** self.k

    def antiderivative(self, r: float) -> float:
        """``G`` with ``G' = 1/g`` on ``[0, R]``."""
        R, k = self.radius, self.k
        if r <= 0.0:
            return -math.inf if k >= 1 else 0.0
        if k == 1:
            return R * math.log(r)
        return R ** k * r ** (1.0 - k) / (1.0 - k)

    def invert(self, v: float) -> float:
        R, k = self.radius, self.k
        if k == 1:
            return math.exp(v / R)
        base = (1.0 - k) * v / R ** k
        return max(base, 0.0) ** (1.0 / (1.0 - k))

    def piece(self, r0: float, r1: float, w: float) -> float:
        """Integral of ``1/g`` over a linear piece of width ``w`` with ``r <= R``."""
        if w <= 0:
            return 0.0
        lo, hi = min(r0, r1), max(r0, r1)
        if hi - lo <= FLAT_REL * hi:
            mid = 0.5 * (lo + hi)
            return math.inf if mid <= 0 else w / float(self.g(mid))
        val = (self.antiderivative(hi) - self.antiderivative(lo)) / (hi - lo)
        return w * val

    def to_json(self):
        out = {"power": self.k}
        if self.radius != 1.0:
            out["radius"] = self.radius
        return out


def _exp_tail_log(r: float, c: float) -> float:
    """``log |H(r)|`` for ``H(r) = r e^{c/r} - c Ei(c/r)`` when ``c/r`` is large (H < 0)."""
    z = c / r
    s, term = 0.0, 1.0
    for k in range(1, 30):
        term *= k / z
        s += term
        if term < 1e-17 * s:
            break
    return math.log(r) + z + math.log(s)


def _exp_direct(r: float, c: float) -> float:
    z = c / r
    return r * math.exp(z) - c * float(special.expi(z))


@dataclass(frozen=True)
class Exponential:
    """``g(r) = exp(-c/r + c/R)`` for ``r < R`` and 1 beyond; ``R = inf`` gives ``exp(-c/r)``."""

    c: float
    radius: float = math.inf

    def __post_init__(self):
        if not self.c > 0:
            raise UsageError("exponential profile needs c > 0")

    def g(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            shift = 0.0 if math.isinf(self.radius) else self.c / self.radius
            out = np.exp(-self.c / np.minimum(r, self.radius) + shift)
        return np.where(r <= 0, 0.0, out)

    def _log_integral(self, lo: float, hi: float) -> float:
        """``log`` of ``integral_lo^hi exp(c/r) dr``, ``0 < lo < hi``."""
        c = self.c
        z0, z1 = c / lo, c / hi
        if z0 <= 50.0:
            val = _exp_direct(hi, c) - _exp_direct(lo, c)
            return math.log(val) if val > 0 else -math.inf
        L0 = _exp_tail_log(lo, c)
        if z1 > 50.0:
            L1 = _exp_tail_log(hi, c)
            return L0 + math.log1p(-math.exp(min(L1 - L0, 0.0))) if L1 < L0 else -math.inf
        # |H(lo)| + H(hi); H(hi) is negative and much smaller in size
        return L0 + math.log1p(_exp_direct(hi, c) * math.exp(-L0))

    def piece(self, r0: float, r1: float, w: float) -> float:
        if w <= 0:
            return 0.0
        lo, hi = min(r0, r1), max(r0, r1)
        shift = 0.0 if math.isinf(self.radius) else self.c / self.radius
        if lo <= 0.0:
            return math.inf
        if hi - lo <= FLAT_REL * hi:
            mid = 0.5 * (lo + hi)
            e = self.c / mid - shift
            return math.inf if e > 700 else w * math.exp(e)
        e = math.log(w) - math.log(hi - lo) + self._log_integral(lo, hi) - shift
        return math.inf if e > 700 else math.exp(e)

    def to_json(self):
        out = {"exp": self.c}
        if not math.isinf(self.radius):
            out["radius"] = self.radius
        return out


def profile_from_json(obj) -> Power | Exponential:
    if "power" in obj:
        return Power(float(obj["power"]), float(obj.get("radius", 1.0)))
    if "exp" in obj:
        return Exponential(float(obj["exp"]), float(obj.get("radius", math.inf)))
    raise UsageError(f"unknown profile {obj!r}")


# ---------------------------------------------------------------------------
# singular sets


@dataclass(frozen=True)
class PointList:
    points: tuple = ()

    def to_json(self):
        return {"points": [p.to_json() for p in self.points]}


@dataclass(frozen=True)
class OrbitClosure:
    """``{phi_n(point) : |n| <= depth}``; exact when the base point is periodic of period <= depth."""

    point: FiberPoint
    depth: int = 8

    def to_json(self):
        return {"orbit": self.point.to_json(), "depth": self.depth}


@dataclass(frozen=True)
class WholeFiber:
    """The codimension-one set ``M x {s0}``."""

    s0: float = 0.5

    def to_json(self):
        return {"fiber": self.s0}


def singular_set_from_json(obj):
    if obj is None or obj == {} or obj == []:
        return None
    if "points" in obj:
        return PointList(tuple(FiberPoint.from_json(p) for p in obj["points"]))
    if "orbit" in obj:
        return OrbitClosure(FiberPoint.from_json(obj["orbit"]), int(obj.get("depth", 8)))
    if "fiber" in obj:
        return WholeFiber(float(obj["fiber"]))
    raise UsageError(f"unknown singular set {obj!r}")


@dataclass(frozen=True)
class Brake:
    """``alpha = g(distance to S)``; ``alpha = 1`` when ``singular_set`` is None."""

    singular_set: PointList | OrbitClosure | WholeFiber | None = None
    profile: Power | Exponential = field(default_factory=lambda: Power(1.0))

    @property
    def empty(self) -> bool:
        s = self.singular_set
        return s is None or (isinstance(s, PointList) and not s.points)

    def to_json(self):
        return {
            "singular_set": None if self.singular_set is None else self.singular_set.to_json(),
            "profile": self.profile.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        if obj is None:
            return cls()
        return cls(singular_set_from_json(obj.get("singular_set")), profile_from_json(obj.get("profile", {"power": 1})))


# ---------------------------------------------------------------------------
# piecewise-linear distance profiles along a fiber


def _lower_envelope(A: np.ndarray, B: np.ndarray, L: float) -> list[tuple[float, float]]:
    """Vertices of ``min_k (A_k + B_k t)`` on ``[0, L]``."""
    k = int(np.lexsort((B, A))[0])
    t = 0.0
    verts = [(0.0, float(A[k]))]
    while True:
        mask = B < B[k] - 1e-15
        if not mask.any():
            break
        idx = np.flatnonzero(mask)
        tj = (A[idx] - A[k]) / (B[k] - B[idx])
        tj = np.maximum(tj, t)
        tmin = tj.min()
        if tmin >= L:
            break
        cand = idx[tj <= tmin + 1e-15]
        k = int(cand[np.argmin(B[cand])])
        t = float(tmin)
        if t > verts[-1][0]:
            verts.append((t, float(A[k] + B[k] * t)))
    verts.append((L, float(A[k] + B[k] * L)))
    return verts


def _chain_lines(D: np.ndarray, hs: np.ndarray, ua: float, ub: float) -> tuple[np.ndarray, np.ndarray]:
    """Values at ``ua`` and ``ub`` of every single-hop chain candidate from ``(z, u)`` to ``(w_k, hs[k])``.

    On an interval free of the heights ``hs`` every candidate is affine in
    ``u``: the hop height is held at its value for ``ua`` when it follows ``u``.
    """
    return _kernels.chain_lines(np.ascontiguousarray(D, dtype=float), np.ascontiguousarray(hs, dtype=float),
                                float(ua), float(ub))


@dataclass
class _Piece:
    start: float  # phi-time from the walk origin
    width: float
    r0: float
    r1: float
    dclock: float


@dataclass(frozen=True)
class ClockResult:
    """Clock value with the reason it is infinite, if it is."""

    value: float
    certificate: str = "finite"  # finite | hit | cap
    hit_time: float | None = None
    lower_bound: float | None = None


class SingularSuspension:
    """Suspension flow of ``torus.system`` slowed down by ``brake``.

    Parameters
    ----------
    torus : MappingTorus
    brake : Brake
    cap : float
        Clock values above ``cap`` are reported as infinite with a ``cap``
        certificate (the accumulated lower bound already exceeds it).
    """

    def __init__(self, torus: MappingTorus, brake: Brake | None = None, cap: float = 1e6):
        self.torus = torus
        self.system = torus.system
        self.brake = brake or Brake()
        self.cap = float(cap)
        self.profile = self.brake.profile
        self.radius = float(self.profile.radius)
        sset = self.brake.singular_set
        self.fiber_height = None
        self.sigmas: list[FiberPoint] = []
        if isinstance(sset, WholeFiber):
            self.fiber_height = float(sset.s0) % 1.0
        elif isinstance(sset, PointList):
            self.sigmas = [torus.normalize(p) for p in sset.points]
        elif isinstance(sset, OrbitClosure):
            sigma = torus.normalize(sset.point)
            self.sigmas = [FiberPoint(self.system.iterate(sigma.base, n), sigma.height)
                           for n in range(-sset.depth, sset.depth + 1)]
        self._sig_bases = [s.base for s in self.sigmas]
        self._sig_heights = np.array([s.height for s in self.sigmas], dtype=float)
        self._reversed = None
        self._sig_table = None

    @property
    def regular(self) -> bool:
        return self.fiber_height is None and not self.sigmas

    # -- distance to S ------------------------------------------------------

    def distance_to_singular(self, p: FiberPoint) -> float:
        p = self.torus.normalize(p)
        if self.fiber_height is not None:
            d = abs(p.height - self.fiber_height)
            return min(d, 1.0 - d)
        if not self.sigmas:
            return math.inf
        D = self._sig_distances(p.base)
        A, _ = _chain_lines(D, self._sig_heights, p.height, p.height)
        return float(A.min())

    def _sig_distances(self, z) -> np.ndarray:
        """Rep-distance tables from ``z`` to every singular base; shape (K, 5, 5)."""
        if isinstance(self.system, AffineTorus):
            if self._sig_table is None:
                self._sig_table = self.system.orbit_table(np.asarray(self._sig_bases, dtype=float), REP_LO, REP_LO + 4)
            X = self.system.orbit_table(np.asarray(z, dtype=float), REP_LO, REP_LO + 4)[0]
            return self.system.dist_array(X[None, :, None, :], self._sig_table[:, None, :, :])
        return rep_distances_many(self.system, z, self._sig_bases)

    def alpha(self, p: FiberPoint) -> float:
        if self.regular:
            return 1.0
        r = self.distance_to_singular(p)
        if r <= ZERO_TOL:
            return 0.0
        return float(self.profile.g(r))

    # -- fiber profiles -----------------------------------------------------

    def _segment_vertices(self, z, ua: float, ub: float) -> list[tuple[float, float]]:
        """Vertices ``(u, r)`` of ``min(dist to S, R)`` along ``(z, u)``, ``ua <= u <= ub``."""
        R = self.radius
        if self.regular or ub <= ua:
            return [(ua, R), (ub, R)]
        if self.fiber_height is not None:
            s0 = self.fiber_height
            cuts = {ua, ub}
            for c in (s0, s0 + 0.5, s0 - 0.5, s0 + R, s0 - R, s0 + 1 - R, s0 - 1 + R):
                if ua < c < ub:
                    cuts.add(c)
            out = []
            for u in sorted(cuts):
                d = abs(u - s0)
                out.append((u, min(d, 1.0 - d, R)))
            return out
        D = self._sig_distances(z)
        near = D[:, 0:4, 0:4].min(axis=(1, 2)) < R
        if not near.any():
            return [(ua, R), (ub, R)]
        Dn, hs = D[near], self._sig_heights[near]
        cuts = sorted({ua, ub, *[h for h in hs if ua < h < ub]})
        verts: list[tuple[float, float]] = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            va, vb = _chain_lines(Dn, hs, a, b)
            A = np.append(va, R)
            B = np.append((vb - va) / (b - a), 0.0)
            env = _lower_envelope(A, B, b - a)
            for t, v in env:
                u = a + t
                if verts and u <= verts[-1][0]:
                    continue
                verts.append((u, max(v, 0.0)))
        return verts

    def _pieces(self, p: FiberPoint) -> Iterator[_Piece]:
        """Linear pieces of the distance profile along the forward phi-orbit of ``p``."""
        p = self.torus.normalize(p)
        z, ua, offset = p.base, p.height, 0.0
        while True:
            verts = self._segment_vertices(z, ua, 1.0)
            for (u0, r0), (u1, r1) in zip(verts[:-1], verts[1:]):
                w = u1 - u0
                if w <= 0:
                    continue
                yield _Piece(offset + u0 - ua, w, r0, r1, self._piece_clock(r0, r1, w))
            offset += 1.0 - ua
            ua = 0.0
            z = self.system.step(z)

    def _piece_clock(self, r0: float, r1: float, w: float) -> float:
        R = self.radius
        if r0 >= R and r1 >= R:
            return w
        return self.profile.piece(r0, r1, w)

    def _partial(self, pc: _Piece, w: float) -> float:
        if w >= pc.width:
            return pc.dclock
        r = pc.r0 + (pc.r1 - pc.r0) * w / pc.width
        return self._piece_clock(pc.r0, r, w)

    # -- clock and flow ----------------------------------------------------

    def clock_detail(self, p: FiberPoint, s: float) -> ClockResult:
        if s < 0:
            raise UsageError("clock needs s >= 0")
        if s == 0:
            return ClockResult(0.0)
        if self.regular:
            return ClockResult(float(s))
        total = 0.0
        for pc in self._pieces(p):
            if pc.start >= s:
                break
            if pc.r0 <= ZERO_TOL:
                return ClockResult(math.inf, "hit", pc.start, total)
            w = min(pc.width, s - pc.start)
            total += self._partial(pc, w)
            if total > self.cap:
                if math.isinf(total):
                    return ClockResult(math.inf, "hit", pc.start + w, self.cap)
                return ClockResult(math.inf, "cap", None, total)
        return ClockResult(total)

    def clock(self, p: FiberPoint, s: float) -> float:
        return self.clock_detail(p, s).value

    def _invert_piece(self, pc: _Piece, rem: float) -> float:
        """phi-width ``w`` inside ``pc`` whose clock equals ``rem``."""
        if rem <= 0:
            return 0.0
        R = self.radius
        if pc.r0 >= R and pc.r1 >= R:
            return rem
        b = (pc.r1 - pc.r0) / pc.width
        hi = max(pc.r0, pc.r1)
        if abs(pc.r1 - pc.r0) <= FLAT_REL * hi:
            g = float(self.profile.g(0.5 * (pc.r0 + pc.r1)))
            return min(rem * g, pc.width)
        if isinstance(self.profile, Power):
            G0 = self.profile.antiderivative(pc.r0)
            r = self.profile.invert(G0 + b * rem)
            w = (r - pc.r0) / b
            return min(max(w, 0.0), pc.width)
        f = lambda w: self._partial(pc, w) - rem
        a, c = 0.0, pc.width
        fc = f(c)
        k = 1
        while not math.isfinite(fc) and k < 60:
            # the piece ends on S; back off until the partial clock is finite
            c = pc.width * (1.0 - 2.0 ** (-k))
            fc = f(c)
            k += 1
        if fc < 0:
            return c
        try:
            return optimize.brentq(f, a, c, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        except (ValueError, RuntimeError) as exc:
            raise NumericalError("clock inversion failed", {"bracket": (a, c), "target": rem}) from exc

    def _forward_times(self, p: FiberPoint, times: Sequence[float]) -> list[tuple[float, bool]]:
        """phi-times ``s*`` with ``clock(p, s*) = t`` for ascending ``t >= 0``; flag marks trapping."""
        out: list[tuple[float, bool]] = []
        if self.regular:
            return [(float(t), False) for t in times]
        it = self._pieces(p)
        total = 0.0
        pc = next(it)
        k = 0
        n = len(times)
        while k < n:
            t = times[k]
            if t <= 0:
                out.append((0.0, False))
                k += 1
                continue
            if pc.r0 <= ZERO_TOL:
                out.extend([(pc.start, True)] * (n - k))
                break
            if total + pc.dclock >= t:
                out.append((pc.start + self._invert_piece(pc, t - total), False))
                k += 1
                continue
            total += pc.dclock
            pc = next(it)
        return out

    def psi(self, t: float, p: FiberPoint) -> FiberPoint:
        return self.trajectory(p, [t])[0]

    def trajectory(self, p: FiberPoint, times: Sequence[float]) -> list[FiberPoint]:
        """``[psi_t(p) for t in times]``; times may be negative and in any order."""
        p = self.torus.normalize(p)
        times = np.asarray(times, dtype=float)
        out: list[FiberPoint | None] = [None] * len(times)
        pos = np.flatnonzero(times >= 0)
        if pos.size:
            order = pos[np.argsort(times[pos], kind="stable")]
            res = self._forward_times(p, [float(times[i]) for i in order])
            for i, (s, _) in zip(order, res):
                out[i] = self.torus.flow(s, p)
        neg = np.flatnonzero(times < 0)
        if neg.size:
            rev = self.reversed()
            q = self.torus.reflect(p)
            order = neg[np.argsort(-times[neg], kind="stable")]
            res = rev._forward_times(q, [float(-times[i]) for i in order])
            for i, (s, _) in zip(order, res):
                out[i] = rev.torus.reflect(rev.torus.flow(s, q))
        return out  # type: ignore[return-value]

    def orbit_offsets(self, p: FiberPoint, times: Sequence[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """For ascending ``times >= 0``: arrays ``(m, h, trapped)`` with ``psi_t(p) = (f^m(base), h)``."""
        p = self.torus.normalize(p)
        res = self._forward_times(p, list(times))
        s = np.array([r[0] for r in res]) + p.height
        m = np.floor(s).astype(np.int64)
        h = s - m
        return m, h, np.array([r[1] for r in res], dtype=bool)

    def reversed(self) -> "SingularSuspension":
        """The same brake seen on the reversed torus, so that its forward flow is ``psi_{-t}``."""
        if self._reversed is None:
            rt = self.torus.reversed()
            sset = self.brake.singular_set
            if isinstance(sset, WholeFiber):
                new = WholeFiber((1.0 - sset.s0) % 1.0)
            elif self.sigmas:
                new = PointList(tuple(self.torus.reflect(s) for s in self.sigmas))
            else:
                new = None
            self._reversed = SingularSuspension(rt, Brake(new, self.profile), self.cap)
            self._reversed._reversed = self
        return self._reversed

    def gamma(self, x) -> float:
        return self.clock(FiberPoint(x, 0.0), 1.0)

    def singular_points(self) -> list[FiberPoint]:
        return list(self.sigmas)

    def to_json(self):
        return {"torus": self.torus.to_json(), "brake": self.brake.to_json(), "cap": self.cap}


def alpha_eval(brake, p: FiberPoint, torus: MappingTorus | None = None) -> float:
    """Brake value at ``p``; ``brake`` may be a :class:`SingularSuspension` or a :class:`Brake` plus ``torus``."""
    if isinstance(brake, SingularSuspension):
        return brake.alpha(p)
    if brake.empty:
        return 1.0
    if torus is None:
        if isinstance(brake.singular_set, WholeFiber):
            d = abs(float(p.height) % 1.0 - brake.singular_set.s0 % 1.0)
            r = min(d, 1.0 - d)
            return 0.0 if r <= ZERO_TOL else float(brake.profile.g(r))
        raise UsageError("point brakes need the mapping torus to measure distances")
    return SingularSuspension(torus, brake).alpha(p)


def clock(ss: SingularSuspension, p: FiberPoint, s: float) -> float:
    return ss.clock(p, s)


def psi_flow(ss: SingularSuspension, t: float, p: FiberPoint) -> FiberPoint:
    return ss.psi(t, p)


def psi_trajectory(ss: SingularSuspension, p: FiberPoint, times: Sequence[float]) -> list[FiberPoint]:
    return ss.trajectory(p, times)


def gamma(ss: SingularSuspension, x) -> float:
    return ss.gamma(x)


# ---------------------------------------------------------------------------
# measures


class _Sampler:
    kind = "abstract"

    def sample(self, n: int, seed: int | None = None) -> list:
        raise NotImplementedError


class LebesgueOnBase(_Sampler):
    """i.i.d. uniform base points (Haar on tori, uniform Bernoulli on the full shift)."""

    kind = "LebesgueOnBase"

    def __init__(self, system: DiscreteSystem, seed: int = 0, window: int = 64):
        self.system = system
        self.seed = seed
        self.window = window

    def sample_array(self, n: int, seed: int | None = None) -> np.ndarray:
        rng = np.random.default_rng(self.seed if seed is None else seed)
        if isinstance(self.system, AffineTorus):
            return rng.random((n, self.system.dim))
        if isinstance(self.system, _ShiftBase):
            return rng.integers(0, self.system.k, size=(n, 2 * self.window + 1), dtype=np.int8)
        if isinstance(self.system, Product) and self.system.as_affine() is not None:
            return rng.random((n, self.system.as_affine().dim))
        raise UsageError(f"no Lebesgue sampler for {self.system.kind}")

    def sample(self, n: int, seed: int | None = None) -> list:
        X = self.sample_array(n, seed)
        if isinstance(self.system, AffineTorus):
            return [tuple(float(v) for v in row) for row in X]
        if isinstance(self.system, Product):
            cuts = np.cumsum([f.dim for f in self.system.factors])[:-1]
            return [tuple(tuple(float(v) for v in part) for part in np.split(row, cuts)) for row in X]
        W = self.window
        return [SymbolSequence(tuple(int(v) for v in row), W, (0,), (0,)) for row in X]

    def to_json(self):
        return {"kind": self.kind, "seed": self.seed}


class ErgodicAlongOrbit(_Sampler):
    """Birkhoff sampling: ``f^{burn_in + i}(x0)`` for ``i = 0, 1, ...``."""

    kind = "ErgodicAlongOrbit"

    def __init__(self, system: DiscreteSystem, x0, burn_in: int = 100, seed: int = 0):
        self.system = system
        self.x0 = x0
        self.burn_in = burn_in
        self.seed = seed

    def sample(self, n: int, seed: int | None = None) -> list:
        if isinstance(self.system, AffineTorus):
            X = np.asarray(self.system.check_point(self.x0), dtype=float)
            X = self.system.apply(X, self.burn_in)
            out = []
            for _ in range(n):
                out.append(tuple(float(v) for v in X))
                X = self.system.apply(X, 1)
            return out
        cur = self.system.iterate(self.x0, self.burn_in)
        out = []
        for _ in range(n):
            out.append(cur)
            cur = self.system.step(cur)
        return out

    def to_json(self):
        from .systems import point_to_json

        return {"kind": self.kind, "x0": point_to_json(self.x0), "burn_in": self.burn_in}


class UniformOnSubshift(_Sampler):
    """Uniform phase along the canonical periodic point of a generated subshift."""

    kind = "UniformOnSubshift"

    def __init__(self, subshift, seed: int = 0):
        self.subshift = subshift
        self.seed = seed

    def sample(self, n: int, seed: int | None = None) -> list:
        rng = np.random.default_rng(self.seed if seed is None else seed)
        cycle = self.subshift.canonical_cycle
        phases = rng.integers(0, len(cycle), size=n)
        return [SymbolSequence.periodic(cycle, int(k)) for k in phases]

    def to_json(self):
        return {"kind": self.kind, "target": self.subshift.target, "seed": self.seed}


def sampler_from_json(obj, system: DiscreteSystem, subshift=None, seed: int = 0):
    kind = obj.get("kind", "LebesgueOnBase")
    if kind == "LebesgueOnBase":
        return LebesgueOnBase(system, seed)
    if kind == "ErgodicAlongOrbit":
        from .systems import point_from_json

        return ErgodicAlongOrbit(system, point_from_json(obj["x0"]), int(obj.get("burn_in", 100)), seed)
    if kind == "UniformOnSubshift":
        if subshift is None:
            raise UsageError("UniformOnSubshift needs a subshift")
        return UniformOnSubshift(subshift, seed)
    raise UsageError(f"unknown measure kind {kind!r}")


# ---------------------------------------------------------------------------
# expectation of gamma


@dataclass(frozen=True)
class Finite:
    estimate: float
    stderr: float

    def to_json(self):
        return {"result": "Finite", "estimate": self.estimate, "stderr": self.stderr}


@dataclass(frozen=True)
class DivergenceSuspected:
    lower_bound: float
    levels: tuple = ()

    def to_json(self):
        return {"result": "DivergenceSuspected", "lower_bound": self.lower_bound, "levels": list(self.levels)}


def _gammas(ss: SingularSuspension, points) -> np.ndarray:
    return np.array([ss.gamma(x) for x in points], dtype=float)


def _square_annulus(rng, n: int, dim: int, outer: float, inner: float) -> np.ndarray:
    out = np.empty((0, dim))
    while out.shape[0] < n:
        Y = rng.uniform(-outer, outer, size=(2 * n, dim))
        Y = Y[np.abs(Y).max(axis=1) >= inner]
        out = np.vstack([out, Y])
    return out[:n]


def expected_gamma(ss: SingularSuspension, mu, n_samples: int = 1000, cap: float | None = None,
                   levels: int = 12, rho0: float = 0.05) -> Finite | DivergenceSuspected:
    """Estimate ``E_mu(gamma)`` or report that it appears infinite.

    Lebesgue measure on a torus with a point singular set is refined around
    the projections of ``S``: square annuli of radii ``rho0 2^-j`` are
    sampled separately and weighted by their exact area.  The integral is
    flagged divergent when the per-annulus contributions stop decaying.
    Other measures use a doubling check on the running mean.
    """
    if n_samples < 100:
        raise UsageError("expected_gamma needs n_samples >= 100")
    if cap is not None and cap != ss.cap:
        ss = SingularSuspension(ss.torus, ss.brake, cap)
    if ss.regular:
        return Finite(1.0, 0.0)
    if ss.fiber_height is not None:
        return DivergenceSuspected(ss.cap)
    if isinstance(mu, LebesgueOnBase) and isinstance(ss.system, AffineTorus):
        return _egamma_annuli(ss, mu, n_samples, levels, rho0)
    g = _gammas(ss, mu.sample(n_samples))
    if not np.all(np.isfinite(g)):
        return DivergenceSuspected(float(np.mean(np.where(np.isfinite(g), g, ss.cap))))
    means = [g[: n_samples // 4].mean(), g[: n_samples // 2].mean(), g.mean()]
    growing = means[1] > 1.1 * means[0] and means[2] > 1.1 * means[1]
    if growing and g.max() > 0.5 * g.sum():
        return DivergenceSuspected(float(g.mean()))
    return Finite(float(g.mean()), float(g.std(ddof=1) / math.sqrt(n_samples)))


def _egamma_annuli(ss, mu, n_samples, levels, rho0):
    sys_ = ss.system
    dim = sys_.dim
    rng = np.random.default_rng(mu.seed)
    centres = []
    for b in ss._sig_bases:
        for n in (-1, 0, 1):
            centres.append(np.asarray(sys_.iterate(b, n)))
    C = np.unique(np.round(np.array(centres), 15), axis=0)

    def nearest(X):
        d = np.abs(X[:, None, :] - C[None, :, :]) % 1.0
        d = np.minimum(d, 1.0 - d).max(axis=2)
        return d.argmin(axis=1), d.min(axis=1)

    per = max(n_samples // (levels + 1), 8)
    X = rng.random((per, dim))
    _, dmin = nearest(X)
    g = _gammas(ss, [tuple(r) for r in X])
    keep = dmin >= rho0
    vals = np.where(keep, g, 0.0)
    if not np.all(np.isfinite(vals)):
        return DivergenceSuspected(ss.cap)
    outer = float(vals.mean())
    var = float(vals.var(ddof=1) / per)
    contrib = []
    for j in range(levels):
        ro, ri = rho0 * 2.0 ** (-j), rho0 * 2.0 ** (-j - 1)
        area = (2 * ro) ** dim - (2 * ri) ** dim
        cj, vj = 0.0, 0.0
        for ci, c in enumerate(C):
            Y = (_square_annulus(rng, per // len(C) + 2, dim, ro, ri) + c) % 1.0
            idx, _ = nearest(Y)
            gy = _gammas(ss, [tuple(r) for r in Y])
            w = np.where(idx == ci, gy, 0.0)
            if not np.all(np.isfinite(w)):
                lb = outer + sum(contrib)
                return DivergenceSuspected(float(lb), tuple(contrib))
            cj += area * w.mean()
            vj += area ** 2 * w.var(ddof=1) / len(w)
        contrib.append(float(cj))
        var += vj
    tail = contrib[-4:]
    ratios = [b / a for a, b in zip(tail[:-1], tail[1:]) if a > 0]
    total = outer + sum(contrib)
    if ratios and float(np.mean(ratios)) >= 0.9:
        return DivergenceSuspected(float(total), tuple(contrib))
    q = float(np.clip(np.mean(ratios) if ratios else 0.0, 0.0, 0.9))
    # remaining inner ball: geometric continuation of the last contribution
    total += contrib[-1] * q / (1.0 - q)
    return Finite(float(total), float(math.sqrt(var)))


# ---------------------------------------------------------------------------
# A_Sing and the lifted measure


@dataclass(frozen=True)
class ASingSample:
    points: tuple
    whole_space: bool = False


def a_sing_sample(ss: SingularSuspension, depth: int) -> ASingSample:
    """Base points ``f^n(pi(sigma))``, ``|n| <= depth``; flags ``A_Sing = M`` for a whole fiber."""
    if depth < 0:
        raise UsageError("depth must be >= 0")
    if ss.fiber_height is not None:
        return ASingSample((), True)
    seen: dict = {}
    for b in ss._sig_bases:
        for n in range(-depth, depth + 1):
            pt = ss.system.iterate(b, n)
            seen.setdefault(_key(pt), pt)
    return ASingSample(tuple(seen.values()), False)


def _key(pt):
    if isinstance(pt, tuple):
        return tuple(round(v, 12) if isinstance(v, float) else _key(v) for v in pt)
    return pt


def lift_integral(ss: SingularSuspension, mu, observable: Callable[[FiberPoint], float], n_samples: int,
                  quad_points: int = 64, egamma=None, with_stderr: bool = False):
    """Integral of ``observable`` against the lift of ``mu`` to an invariant probability of ``psi``.

    Each sampled base point contributes the ``psi``-time integral of the
    observable across its fiber (midpoint rule in ``psi``-time); the sum is
    normalised by the summed traversal times.
    """
    if egamma is None:
        egamma = expected_gamma(ss, mu, max(n_samples, 100))
    if isinstance(egamma, DivergenceSuspected):
        raise DomainError("lifted measure needs a finite expectation of the traversal time; "
                          f"divergence suspected (lower bound {egamma.lower_bound:.3g})")
    inner = np.empty(n_samples)
    gam = np.empty(n_samples)
    M = quad_points
    for a, x in enumerate(mu.sample(n_samples)):
        p = FiberPoint(x, 0.0)
        g = ss.gamma(x)
        if not math.isfinite(g):
            raise DomainError("sampled base point has an infinite traversal time")
        ts = (np.arange(M) + 0.5) * g / M
        pts = ss.trajectory(p, ts)
        inner[a] = g / M * sum(observable(q) for q in pts)
        gam[a] = g
    est = float(inner.sum() / gam.sum())
    if not with_stderr:
        return est
    resid = inner - est * gam
    se = float(math.sqrt(resid.var(ddof=1) / n_samples) / gam.mean())
    return est, se
