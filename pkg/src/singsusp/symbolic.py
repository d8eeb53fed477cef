"""Full shifts and hierarchically generated minimal subshifts.

The generated subshifts are binary.  Their construction:

* level 1: ``N1`` blocks of length ``L1``.  One of them is a marker block
  ``1 0000 1 <code>`` where the code spells the target entropy; every other
  block starts with ``1`` and avoids ``000``.  So ``0000`` occurs only
  inside markers, and the marker identifies the subshift.
* level 2: each block is the marker, then a de Bruijn sequence of order 2
  over the level-1 blocks (every ordered pair of level-1 blocks appears),
  then a few random level-1 blocks.  Every word of length ``L1`` lies inside
  some pair of consecutive level-1 blocks, hence inside every level-2 block.
* level l >= 3: each block lists every level-(l-1) block once, then adds
  random level-(l-1) blocks.

The canonical point is the periodic sequence whose period concatenates the
top-level blocks.  Word counts are taken on that point, read cyclically.
``N1`` and ``L1`` are tuned so that ``log p(L1) / L1`` hits the target.
"""

from __future__ import annotations

import base64
import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .systems import SymbolSequence, UsageError

__all__ = [
    "Subshift",
    "Level",
    "FullShiftLanguage",
    "ConstantLanguage",
    "full_shift_entropy",
    "minimal_subshift_with_entropy",
    "minimality_certificate",
    "Certified",
    "Refuted",
    "choose_subshift_avoiding",
    "AvoidanceFailure",
    "InfeasibleTarget",
    "word_count",
    "de_bruijn",
    "language_disjoint",
]

MAX_CANONICAL = 1 << 24
MARKER_HEAD = (1, 0, 0, 0, 0, 1)
CODE_BITS = 8
L1_CHOICES = (24, 28, 32, 40, 48, 56, 64, 80, 96, 128)
# achievable band of targets, set by the level-1 block lengths allowed above
MIN_TARGET, MAX_TARGET = 0.04, 0.55
ENVELOPE_VERSION = 1


class InfeasibleTarget(ValueError):
    """No schedule reaches the requested entropy within tolerance."""


class AvoidanceFailure(RuntimeError):
    """Every candidate target produced a language meeting a forbidden window."""

    def __init__(self, message: str, report: list):
        super().__init__(message)
        self.report = report


def full_shift_entropy(k: int) -> float:
    """``log k``, cross-checked against the exact word count ``p(n) = k^n``."""
    if k < 2:
        raise UsageError("full shift entropy needs k >= 2")
    n = 6
    words = np.indices((k,) * n).reshape(n, -1).T
    assert np.unique(words, axis=0).shape[0] == k ** n
    return math.log(k)


def de_bruijn(k: int, n: int) -> list[int]:
    """Cyclic de Bruijn sequence B(k, n) via Lyndon words."""
    a = [0] * (k * n)
    seq: list[int] = []

    def db(t, p):
        if t > n:
            if n % p == 0:
                seq.extend(a[1:p + 1])
        else:
            a[t] = a[t - p]
            db(t + 1, p)
            for j in range(a[t - p] + 1, k):
                a[t] = j
                db(t + 1, t)

    db(1, 1)
    return seq


# ---------------------------------------------------------------------------
# word codes on cyclic sequences


@njit(cache=True, nogil=True)
def _cyclic_codes(seq, L):
    """Integer code of the cyclic word starting at each position (exact when L <= 62)."""
    n = seq.shape[0]
    out = np.empty(n, dtype=np.int64)
    if L <= 62:
        mask = (np.int64(1) << L) - 1
        c = np.int64(0)
        for t in range(L):
            c = (c << 1) | np.int64(seq[t % n])
        for i in range(n):
            out[i] = c
            c = ((c << 1) | np.int64(seq[(i + L) % n])) & mask
        return out
    # polynomial rolling hash, wrapping 64-bit arithmetic
    base = np.uint64(0x100000001B3)
    powL = np.uint64(1)
    for _ in range(L):
        powL = powL * base
    h = np.uint64(0)
    for t in range(L):
        h = h * base + np.uint64(seq[t % n] + 1)
    for i in range(n):
        out[i] = np.int64(h)
        h = h * base + np.uint64(seq[(i + L) % n] + 1) - powL * np.uint64(seq[i] + 1)
    return out


def _codes(seq: np.ndarray, L: int) -> np.ndarray:
    return _cyclic_codes(np.ascontiguousarray(seq, dtype=np.uint8), int(L))


def word_count(seq: np.ndarray, L: int, cyclic: bool = True) -> int:
    """Number of distinct words of length ``L`` in ``seq`` (read cyclically by default)."""
    seq = np.asarray(seq, dtype=np.uint8)
    codes = _codes(seq, L)
    if not cyclic:
        codes = codes[: max(seq.size - L + 1, 0)]
    return int(np.unique(codes).size)


# ---------------------------------------------------------------------------
# languages


@dataclass
class Level:
    length: int
    blocks: np.ndarray  # (N, length) uint8

    @property
    def count(self) -> int:
        return int(self.blocks.shape[0])


class _Language:
    alphabet = 2
    target: float = 0.0
    tol: float = 0.0
    n_levels: int = 0

    @property
    def canonical(self) -> np.ndarray:
        raise NotImplementedError

    @functools.cached_property
    def canonical_cycle(self) -> np.ndarray:
        arr = np.asarray(self.canonical, dtype=np.int8)
        arr.flags.writeable = False
        return arr

    @functools.cached_property
    def _canonical_bytes(self) -> bytes:
        c = np.asarray(self.canonical, dtype=np.uint8)
        return c.tobytes()

    def canonical_point(self, phase: int = 0) -> SymbolSequence:
        return SymbolSequence.periodic(self.canonical_cycle, phase)

    def admissible_codes(self, L: int) -> np.ndarray:
        return np.unique(_codes(self.canonical, L))

    def p(self, L: int) -> int:
        return word_count(self.canonical, L)

    def contains_word(self, word: Sequence[int]) -> bool:
        w = bytes(int(v) for v in word)
        if not w:
            return True
        c = self._canonical_bytes
        hay = c + c[: len(w) - 1] if len(w) <= len(c) else c * (len(w) // len(c) + 2)
        return hay.find(w) >= 0


class FullShiftLanguage(_Language):
    """The full shift on ``k`` symbols.

    Its canonical point lists every word up to ``depth`` symbols and then a
    long run of zeros, so it is transitive but not syndetic.
    """

    def __init__(self, k: int = 2, depth: int = 8, zero_run: int = 1 << 20):
        self.alphabet = k
        self.k = k
        self.depth = depth
        self.zero_run = zero_run
        self.target = math.log(k)

    @functools.cached_property
    def canonical(self) -> np.ndarray:
        parts = []
        for n in range(1, self.depth + 1):
            parts.append(np.indices((self.k,) * n).reshape(n, -1).T.ravel())
        parts.append(np.zeros(self.zero_run, dtype=np.int64))
        return np.concatenate(parts).astype(np.uint8)

    def admissible_codes(self, L: int) -> np.ndarray:
        if self.k != 2 or L > 20:
            raise UsageError("full-shift word enumeration limited to binary words of length <= 20")
        return np.arange(2 ** L, dtype=np.int64)


class ConstantLanguage(_Language):
    """The one-point subshift ``...sss...``."""

    def __init__(self, symbol: int = 0):
        self.symbol = symbol

    @functools.cached_property
    def canonical(self) -> np.ndarray:
        return np.array([self.symbol], dtype=np.uint8)


class Subshift(_Language):
    """A generated subshift: level schedule, canonical point and measured entropy."""

    def __init__(self, target: float, tol: float, levels: list[Level], measure_len: int, seed: int):
        self.alphabet = 2
        self.target = float(target)
        self.tol = float(tol)
        self.levels = levels
        self.n_levels = len(levels)
        self.measure_len = measure_len
        self.seed = seed

    @property
    def L1(self) -> int:
        return self.levels[0].length

    @property
    def L2(self) -> int:
        return self.levels[1].length

    @functools.cached_property
    def canonical(self) -> np.ndarray:
        return np.ascontiguousarray(self.levels[-1].blocks.reshape(-1))

    @functools.cached_property
    def measured_entropy(self) -> float:
        return math.log(self.p(self.measure_len)) / self.measure_len

    def level_bands(self) -> list[tuple[float, float]]:
        """Declared band for each level's rate: level 1 within ``tol`` of the target, then non-increasing."""
        bands = [(self.target - self.tol, self.target + self.tol)]
        rates = self.level_rates()
        for r in rates[:-1]:
            bands.append((0.0, r + 1e-12))
        return bands[: len(rates)]

    def level_rates(self) -> list[float]:
        """``log p(L_l) / L_l`` on the canonical point for each level that fits in it."""
        out = []
        for lv in self.levels:
            if lv.length <= self.canonical.size:
                out.append(math.log(self.p(lv.length)) / lv.length)
        return out

    def block_set(self, level: int) -> set[bytes]:
        return {row.tobytes() for row in self.levels[level - 1].blocks}

    def to_json(self) -> dict:
        """Versioned envelope; block sets are bit-packed and base64-encoded."""
        return {
            "version": ENVELOPE_VERSION,
            "target": self.target,
            "tol": self.tol,
            "seed": self.seed,
            "measure_len": self.measure_len,
            "measured_entropy": self.measured_entropy,
            "levels": [
                {
                    "length": lv.length,
                    "count": lv.count,
                    "blocks": base64.b64encode(np.packbits(lv.blocks, axis=None).tobytes()).decode("ascii"),
                }
                for lv in self.levels
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Subshift":
        if obj.get("version") != ENVELOPE_VERSION:
            raise UsageError(f"unsupported subshift envelope version {obj.get('version')!r}")
        levels = []
        for lv in obj["levels"]:
            bits = np.unpackbits(np.frombuffer(base64.b64decode(lv["blocks"]), dtype=np.uint8))
            n = lv["count"] * lv["length"]
            levels.append(Level(lv["length"], bits[:n].reshape(lv["count"], lv["length"]).copy()))
        return cls(obj["target"], obj["tol"], levels, obj["measure_len"], obj["seed"])


# ---------------------------------------------------------------------------
# construction


def _marker_block(code: int, L1: int) -> np.ndarray:
    bits = [(code >> (CODE_BITS - 1 - i)) & 1 for i in range(CODE_BITS)]
    body = list(MARKER_HEAD)
    for b in bits:
        body += [1, b]
    body += [1] * (L1 - len(body))
    return np.array(body, dtype=np.uint8)


def _regular_blocks(rng: np.random.Generator, L1: int, count: int) -> np.ndarray:
    """Distinct words of length L1 starting with 1 and avoiding 000 (tokens 1, 10, 100)."""
    seen: set[bytes] = set()
    out = []
    tokens = ((1,), (1, 0), (1, 0, 0))
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 50 * count + 1000:
            raise InfeasibleTarget(f"cannot draw {count} distinct level-1 blocks of length {L1}")
        w: list[int] = []
        while len(w) < L1:
            w.extend(tokens[rng.integers(0, 3)])
        arr = np.array(w[:L1], dtype=np.uint8)
        key = arr.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(arr)
    return np.array(out, dtype=np.uint8).reshape(count, L1)


def _level1(target: float, tol: float, L1: int, N1: int, seed: int) -> np.ndarray:
    code = int(round(target / tol)) % (1 << CODE_BITS)
    rng = np.random.default_rng([seed, L1])
    regular = _regular_blocks(rng, L1, max(N1 - 1, 1))[: max(N1 - 1, 0)]
    return np.vstack([_marker_block(code, L1)[None, :], regular])


def _pair_cover(B1: np.ndarray) -> np.ndarray:
    """Level-1 blocks laid out along a linear de Bruijn sequence of order 2."""
    N = B1.shape[0]
    seq = de_bruijn(N, 2) if N > 1 else [0, 0]
    seq = list(seq) + [seq[0]]
    return np.array(seq, dtype=np.int64)


def _rate_at(B1: np.ndarray) -> float:
    L1 = B1.shape[1]
    cover = B1[_pair_cover(B1)].reshape(-1)
    return math.log(word_count(cover, L1, cyclic=False)) / L1


def _tune_level1(target: float, tol: float, seed: int) -> tuple[np.ndarray, float]:
    best = None
    for L1 in L1_CHOICES:
        if L1 < len(MARKER_HEAD) + 2 * CODE_BITS:
            continue
        # rate grows with N1; bisect on the count
        lo, hi = 1, 2
        while _rate_at(_level1(target, tol, L1, hi, seed)) < target and hi < 4096:
            lo, hi = hi, hi * 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _rate_at(_level1(target, tol, L1, mid, seed)) < target:
                lo = mid
            else:
                hi = mid
        for N1 in (lo, hi):
            B1 = _level1(target, tol, L1, N1, seed)
            rate = _rate_at(B1)
            err = abs(rate - target)
            if best is None or err < best[0]:
                best = (err, B1, rate)
        if best[0] <= tol / 2:
            break
    if best is None or best[0] > tol:
        raise InfeasibleTarget(
            f"target {target} not reachable within tol {tol}; achievable band is "
            f"({MIN_TARGET}, {MAX_TARGET})")
    return best[1], best[2]


def minimal_subshift_with_entropy(c: float, levels: int = 4, tol: float = 0.02, seed: int = 0) -> Subshift:
    """Binary subshift whose words of length ``L1`` grow at rate ``c`` and that recurs syndetically."""
    return _build(float(c), int(levels), float(tol), int(seed))


@functools.lru_cache(maxsize=32)
def _build(c: float, levels: int, tol: float, seed: int) -> Subshift:
    if not c > 0:
        raise UsageError("target entropy must be positive")
    if levels < 3:
        raise UsageError("need at least 3 levels")
    if tol <= 0:
        raise UsageError("tol must be positive")
    if not (MIN_TARGET <= c <= MAX_TARGET):
        raise InfeasibleTarget(f"target {c} outside the achievable band [{MIN_TARGET}, {MAX_TARGET}]")
    B1, _ = _tune_level1(c, tol, seed)
    N1, L1 = B1.shape
    rng = np.random.default_rng([seed, 2])
    cover = _pair_cover(B1)
    extra = max(2, N1 // 4)
    n2 = 3
    rows = []
    for _ in range(n2):
        picks = np.concatenate([[0], cover, rng.integers(0, N1, size=extra)])
        rows.append(B1[picks].reshape(-1))
    lv = [Level(L1, B1), Level(len(rows[0]), np.array(rows, dtype=np.uint8))]
    for ell in range(3, levels + 1):
        prev = lv[-1]
        n_blocks = 2
        rows = []
        for _ in range(n_blocks):
            picks = np.concatenate([np.arange(prev.count), rng.integers(0, prev.count, size=1)])
            rows.append(prev.blocks[picks].reshape(-1))
        length = len(rows[0])
        if length * n_blocks > MAX_CANONICAL:
            raise InfeasibleTarget(
                f"target {c} with {levels} levels needs a canonical point of {length * n_blocks} symbols "
                f"(budget {MAX_CANONICAL}); use fewer levels or a target in ({MIN_TARGET}, 0.45)")
        lv.append(Level(length, np.array(rows, dtype=np.uint8)))
    sh = Subshift(c, tol, lv, L1, seed)
    if abs(sh.measured_entropy - c) > tol:
        raise InfeasibleTarget(f"measured rate {sh.measured_entropy:.4f} misses target {c} by more than {tol}")
    return sh


def language_disjoint(a: _Language, b: _Language, L: int) -> bool:
    """True when the two canonical points share no word of length ``L``."""
    return np.intersect1d(a.admissible_codes(L), b.admissible_codes(L)).size == 0


# ---------------------------------------------------------------------------
# minimality certificates


@dataclass(frozen=True)
class Certified:
    gap: int

    def to_json(self):
        return {"result": "Certified", "gap": self.gap}


@dataclass(frozen=True)
class Refuted:
    word: tuple
    position: int

    def to_json(self):
        return {"result": "Refuted", "word": list(self.word), "position": self.position}


def _max_gaps(codes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per distinct code: largest cyclic gap between occurrences and the position after which it opens."""
    order = np.argsort(codes, kind="stable")
    sc = codes[order]
    starts = np.flatnonzero(np.r_[True, sc[1:] != sc[:-1]])
    ends = np.r_[starts[1:], sc.size]
    pos = order  # sorted by code, positions ascending within each code (stable sort)
    gaps = np.empty(sc.size, dtype=np.int64)
    gaps[:-1] = pos[1:] - pos[:-1]
    gaps[ends - 1] = pos[starts] + n - pos[ends - 1]
    uniq = sc[starts]
    best = np.maximum.reduceat(gaps, starts)
    # position where the largest gap begins
    where = np.empty(uniq.size, dtype=np.int64)
    for g, (s, e) in enumerate(zip(starts, ends)):
        k = s + int(np.argmax(gaps[s:e]))
        where[g] = pos[k]
    return uniq, best, where


def minimality_certificate(sh: _Language, word_len: int, window: int):
    """Check that every admissible word of length ``word_len`` occurs in every ``window``-window.

    Admissible words are those of the language; occurrences are searched on
    the canonical point.  A word missing from the canonical point altogether
    refutes at position 0.
    """
    seq = np.asarray(sh.canonical, dtype=np.uint8)
    n = seq.size
    if word_len < 1:
        raise UsageError("word_len must be >= 1")
    top = getattr(sh, "levels", None)
    if top is not None and word_len > top[-1].length:
        raise UsageError("word_len exceeds the top block length")
    codes = _codes(seq, word_len)
    uniq, gaps, where = _max_gaps(codes, n)
    admissible = sh.admissible_codes(word_len)
    missing = np.setdiff1d(admissible, uniq)
    if missing.size:
        return Refuted(_decode(int(missing[0]), word_len), 0)
    bound = gaps + word_len - 1
    worst = int(np.argmax(bound))
    if bound[worst] <= window:
        return Certified(int(bound[worst]))
    start = int(where[worst]) + 1
    word = tuple(int(v) for v in np.take(seq, np.arange(where[worst], where[worst] + word_len), mode="wrap"))
    return Refuted(word, start % n)


def _decode(code: int, L: int) -> tuple:
    if L > 62:
        return ()
    return tuple((code >> (L - 1 - i)) & 1 for i in range(L))


# ---------------------------------------------------------------------------
# avoidance


def choose_subshift_avoiding(forbidden: Iterable[Sequence[int]], targets: Sequence[float], levels: int = 3,
                             tol: float = 0.02, seed: int = 0) -> Subshift:
    """First generated subshift (over ``targets``) whose language contains no forbidden window.

    A point whose window is absent from the language is not in the subshift,
    so a success certifies that the subshift misses every sampled point.
    """
    forbidden = [tuple(int(v) for v in w) for w in forbidden]
    report = []
    for c in targets:
        try:
            sh = minimal_subshift_with_entropy(c, levels, tol, seed)
        except InfeasibleTarget as exc:
            report.append({"target": c, "error": str(exc)})
            continue
        hits = [w for w in forbidden if sh.contains_word(w)]
        if not hits:
            sh.avoid_report = report  # type: ignore[attr-defined]
            return sh
        report.append({"target": c, "hits": len(hits), "example": list(hits[0])})
    raise AvoidanceFailure("every target meets a forbidden window", report)
