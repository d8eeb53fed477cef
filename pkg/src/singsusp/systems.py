"""Base systems f: M -> M with their metrics.

Two families are supported:

* affine torus maps ``x -> A x + b (mod 1)`` with ``A`` unimodular; the cat
  map, circle rotations, the skew map ``(x, y) -> (x + y, y)`` and products
  of these all live here and share vectorised orbit code;
* shift spaces (the full shift on ``k`` symbols and generated subshifts),
  whose points are :class:`SymbolSequence` handles.

Torus points are tuples of floats in ``[0, 1)``.  The torus metric is the
max over coordinates of the circle distance, so products use the max of the
factor metrics throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

__all__ = [
    "SymbolSequence",
    "DiscreteSystem",
    "AffineTorus",
    "CatMap",
    "CircleRotation",
    "SkewTorus",
    "FullShift",
    "SubshiftSystem",
    "Product",
    "step",
    "step_inverse",
    "orbit_segment",
    "base_distance",
    "system_from_json",
    "point_to_json",
    "point_from_json",
    "UsageError",
]

# distances below this resolve to zero for symbol sequences compared on a window
SHIFT_RESOLUTION = 60


class UsageError(ValueError):
    """A point or argument does not fit the system it was passed to."""


class SymbolSequence:
    """Two-sided symbol sequence: a finite word plus periodic tails.

    ``word[origin]`` is the symbol at index 0.  Indices left of the word
    read the ``left`` cycle (so that ``left[-1]`` sits just before the word),
    indices right of it read the ``right`` cycle.  Storage is shared int8
    arrays, so shifting a long periodic point is cheap.
    """

    __slots__ = ("word", "origin", "left", "right")

    def __init__(self, word, origin: int = 0, left=(0,), right=(0,)):
        self.word = _frozen_array(word)
        self.origin = int(origin)
        self.left = _frozen_array(left)
        self.right = _frozen_array(right)
        if not self.left.size or not self.right.size:
            raise UsageError("tail cycles must be nonempty")

    def _state(self):
        return (self.word.tobytes(), self.origin, self.left.tobytes(), self.right.tobytes())

    def __eq__(self, other):
        return isinstance(other, SymbolSequence) and self._state() == other._state()

    def __hash__(self):
        return hash(self._state())

    def __repr__(self):
        w = self.word.tolist()
        if len(w) > 12:
            w = w[:12] + ["..."]
        return f"SymbolSequence(word={w}, origin={self.origin}, left=<{self.left.size}>, right=<{self.right.size}>)"

    def __getitem__(self, i: int) -> int:
        j = self.origin + i
        n = self.word.size
        if 0 <= j < n:
            return int(self.word[j])
        if j >= n:
            return int(self.right[(j - n) % self.right.size])
        return int(self.left[j % self.left.size])

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Symbols at indices ``lo..hi`` inclusive."""
        idx = np.arange(lo, hi + 1) + self.origin
        n = self.word.size
        out = np.empty(idx.size, dtype=np.int8)
        inside = (idx >= 0) & (idx < n)
        if n:
            out[inside] = self.word[idx[inside]]
        right = idx >= n
        out[right] = self.right[(idx[right] - n) % self.right.size]
        left = idx < 0
        out[left] = self.left[idx[left] % self.left.size]
        return out

    def shifted(self, k: int) -> "SymbolSequence":
        return SymbolSequence(self.word, self.origin + k, self.left, self.right)

    def extent(self) -> int:
        """Radius beyond which both tails are periodic with a common period."""
        period = math.lcm(self.left.size, self.right.size)
        return max(abs(self.origin), abs(self.word.size - self.origin)) + period

    @classmethod
    def periodic(cls, cycle: Sequence[int], phase: int = 0) -> "SymbolSequence":
        arr = _frozen_array(cycle)
        return cls(arr, phase % arr.size, arr, arr)

    @classmethod
    def from_window(cls, symbols: Sequence[int], lo: int, fill: int = 0) -> "SymbolSequence":
        """Sequence equal to ``symbols`` on ``lo..lo+len-1`` and ``fill`` elsewhere."""
        return cls(symbols, -lo, (fill,), (fill,))


def _frozen_array(values) -> np.ndarray:
    if isinstance(values, np.ndarray) and values.dtype == np.int8 and not values.flags.writeable:
        return values
    arr = np.array(values, dtype=np.int8).reshape(-1)
    arr.flags.writeable = False
    return arr


def _circle_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.abs(a - b) % 1.0
    return np.minimum(d, 1.0 - d)


class DiscreteSystem:
    """A homeomorphism of a compact metric space."""

    kind: str = "abstract"
    symbolic: bool = False

    def step(self, p):
        raise NotImplementedError

    def step_inverse(self, p):
        raise NotImplementedError

    def distance(self, p, q) -> float:
        raise NotImplementedError

    def inverse(self) -> "DiscreteSystem":
        raise NotImplementedError

    def iterate(self, p, n: int):
        f = self.step if n >= 0 else self.step_inverse
        for _ in range(abs(n)):
            p = f(p)
        return p

    def check_point(self, p):
        return p

    def to_json(self) -> dict[str, Any]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_json()['params']})"


class AffineTorus(DiscreteSystem):
    """``x -> A x + b (mod 1)`` on the d-torus, ``A`` an integer matrix with det +-1."""

    symbolic = False

    def __init__(self, matrix, offset=None, kind: str = "AffineTorus", params=None):
        A = np.atleast_2d(np.asarray(matrix, dtype=np.int64))
        if A.shape[0] != A.shape[1]:
            raise UsageError("matrix must be square")
        det = round(np.linalg.det(A))
        if abs(det) != 1:
            raise UsageError(f"matrix must be unimodular, det={det}")
        self.A = A
        self.dim = A.shape[0]
        self.b = np.zeros(self.dim) if offset is None else np.asarray(offset, dtype=float).reshape(self.dim)
        self.Ainv = np.rint(np.linalg.inv(A)).astype(np.int64)
        self.kind = kind
        self._params = {} if params is None else params

    # vectorised core: X has shape (..., dim)
    def apply(self, X: np.ndarray, n: int = 1) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if n >= 0:
            for _ in range(n):
                X = (X @ self.A.T + self.b) % 1.0
        else:
            for _ in range(-n):
                X = ((X - self.b) @ self.Ainv.T) % 1.0
        return X

    def dist_array(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return _circle_dist(np.asarray(X, float), np.asarray(Y, float)).max(axis=-1)

    def orbit_table(self, X: np.ndarray, lo: int, hi: int) -> np.ndarray:
        """Array ``T[a, m - lo] = f^m(X[a])`` for ``lo <= m <= hi``; shape (N, hi-lo+1, dim)."""
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        out = np.empty((X.shape[0], hi - lo + 1, self.dim))
        start = self.apply(X, lo) if lo <= 0 else self.apply(X, lo)
        cur = start
        for m in range(hi - lo + 1):
            out[:, m] = cur
            cur = self.apply(cur, 1)
        return out

    def check_point(self, p):
        if isinstance(p, SymbolSequence):
            raise UsageError(f"{self.kind} expects torus coordinates, got a symbol sequence")
        arr = np.asarray(p, dtype=float).reshape(-1)
        if arr.size != self.dim:
            raise UsageError(f"{self.kind} expects {self.dim} coordinates, got {arr.size}")
        return tuple(float(v) for v in arr % 1.0)

    def step(self, p):
        p = self.check_point(p)
        return tuple(float(v) for v in self.apply(np.asarray(p), 1))

    def step_inverse(self, p):
        p = self.check_point(p)
        return tuple(float(v) for v in self.apply(np.asarray(p), -1))

    def iterate(self, p, n: int):
        p = self.check_point(p)
        return tuple(float(v) for v in self.apply(np.asarray(p), n))

    def distance(self, p, q) -> float:
        p, q = self.check_point(p), self.check_point(q)
        return float(self.dist_array(np.asarray(p), np.asarray(q)))

    def inverse(self) -> "AffineTorus":
        b = -(self.Ainv @ self.b)
        inv = AffineTorus(self.Ainv, b % 1.0, kind=self.kind, params=self._params)
        inv._inverse_of = self
        return inv

    def lipschitz(self) -> float:
        """Lipschitz constant of f for the max-circle metric."""
        return float(np.abs(self.A).sum(axis=1).max())

    def to_json(self):
        if getattr(self, "_inverse_of", None) is not None:
            return {"kind": "Inverse", "params": {"system": self._inverse_of.to_json()}}
        if self.kind == "AffineTorus":
            return {"kind": "AffineTorus", "params": {"matrix": self.A.tolist(), "offset": self.b.tolist()}}
        return {"kind": self.kind, "params": dict(self._params)}


def CatMap() -> AffineTorus:
    """Linear torus map induced by ``[[2, 1], [1, 1]]``."""
    return AffineTorus([[2, 1], [1, 1]], kind="CatMap")


def CircleRotation(angle: float) -> AffineTorus:
    return AffineTorus([[1]], [angle % 1.0], kind="CircleRotation", params={"angle": float(angle)})


def SkewTorus() -> AffineTorus:
    """``h(x, y) = (x + y, y)``."""
    return AffineTorus([[1, 1], [0, 1]], kind="SkewTorus")


class _ShiftBase(DiscreteSystem):
    symbolic = True

    def __init__(self, k: int, direction: int = 1):
        if k < 1:
            raise UsageError("alphabet size must be >= 1")
        self.k = int(k)
        self.direction = 1 if direction >= 0 else -1

    def check_point(self, p):
        if not isinstance(p, SymbolSequence):
            raise UsageError(f"{self.kind} expects a SymbolSequence")
        return p

    def step(self, p):
        return self.check_point(p).shifted(self.direction)

    def step_inverse(self, p):
        return self.check_point(p).shifted(-self.direction)

    def iterate(self, p, n: int):
        return self.check_point(p).shifted(self.direction * n)

    def distance(self, p, q) -> float:
        p, q = self.check_point(p), self.check_point(q)
        bound = max(p.extent(), q.extent(), SHIFT_RESOLUTION)
        a = p.window(-bound, bound)
        b = q.window(-bound, bound)
        diff = a != b
        if not diff.any():
            return 0.0
        idx = np.flatnonzero(diff) - bound
        return 2.0 ** (-int(np.abs(idx).min()))

    def symbol_table(self, points: Sequence[SymbolSequence], lo: int, hi: int) -> np.ndarray:
        """``T[a, c] = points[a][lo + c]``, reflected ``i -> -i`` when the shift runs backwards.

        In either orientation ``d(f^m x, f^k y)`` compares ``T_x[i + m]`` with
        ``T_y[i + k]``, since the metric only sees ``|i|``.
        """
        if self.direction > 0:
            rows = [self.check_point(p).window(lo, hi) for p in points]
        else:
            rows = [self.check_point(p).window(-hi, -lo)[::-1] for p in points]
        return np.asarray(rows, dtype=np.int8).reshape(len(rows), hi - lo + 1)


class FullShift(_ShiftBase):
    """Full shift on ``k`` symbols; ``(f x)_i = x_{i+1}``."""

    kind = "FullShift"

    def inverse(self):
        return FullShift(self.k, -self.direction)

    def to_json(self):
        params = {"k": self.k}
        if self.direction < 0:
            params["direction"] = -1
        return {"kind": "FullShift", "params": params}


class SubshiftSystem(_ShiftBase):
    """The shift restricted to a generated subshift (see :mod:`singsusp.symbolic`)."""

    kind = "Subshift"

    def __init__(self, subshift, direction: int = 1):
        super().__init__(subshift.alphabet, direction)
        self.subshift = subshift

    def inverse(self):
        return SubshiftSystem(self.subshift, -self.direction)

    def to_json(self):
        params = {"target": self.subshift.target, "levels": self.subshift.n_levels, "tol": self.subshift.tol}
        if self.direction < 0:
            params["direction"] = -1
        return {"kind": "Subshift", "params": params}


class Product(DiscreteSystem):
    """Product system with the max metric; points are tuples of factor points."""

    kind = "Product"

    def __init__(self, factors: Sequence[DiscreteSystem]):
        if not factors:
            raise UsageError("product needs at least one factor")
        self.factors = list(factors)
        self.symbolic = False

    def check_point(self, p):
        if not isinstance(p, tuple) or len(p) != len(self.factors):
            raise UsageError("product point must be a tuple with one entry per factor")
        return tuple(f.check_point(x) for f, x in zip(self.factors, p))

    def step(self, p):
        return tuple(f.step(x) for f, x in zip(self.factors, self.check_point(p)))

    def step_inverse(self, p):
        return tuple(f.step_inverse(x) for f, x in zip(self.factors, self.check_point(p)))

    def distance(self, p, q) -> float:
        p, q = self.check_point(p), self.check_point(q)
        return max(f.distance(x, y) for f, x, y in zip(self.factors, p, q))

    def inverse(self):
        return Product([f.inverse() for f in self.factors])

    def as_affine(self) -> AffineTorus | None:
        """Block-diagonal affine map when every factor is affine, else None."""
        if not all(isinstance(f, AffineTorus) for f in self.factors):
            return None
        dim = sum(f.dim for f in self.factors)
        A = np.zeros((dim, dim), dtype=np.int64)
        b = np.zeros(dim)
        i = 0
        for f in self.factors:
            A[i:i + f.dim, i:i + f.dim] = f.A
            b[i:i + f.dim] = f.b
            i += f.dim
        return AffineTorus(A, b, kind="Product", params={"factors": [f.to_json() for f in self.factors]})

    def to_json(self):
        return {"kind": "Product", "params": {"factors": [f.to_json() for f in self.factors]}}


def step(system: DiscreteSystem, p):
    return system.step(p)


def step_inverse(system: DiscreteSystem, p):
    return system.step_inverse(p)


def orbit_segment(system: DiscreteSystem, p, n_from: int, n_to: int) -> list:
    """``[f^n_from(p), ..., f^n_to(p)]``."""
    if n_from > n_to:
        raise UsageError("n_from must not exceed n_to")
    cur = system.iterate(system.check_point(p), n_from)
    out = [cur]
    for _ in range(n_to - n_from):
        cur = system.step(cur)
        out.append(cur)
    return out


def base_distance(system: DiscreteSystem, p, q) -> float:
    return system.distance(p, q)


def system_from_json(obj: dict) -> DiscreteSystem:
    kind = obj["kind"]
    params = obj.get("params") or {}
    if kind == "CatMap":
        return CatMap()
    if kind == "CircleRotation":
        return CircleRotation(params["angle"])
    if kind == "SkewTorus":
        return SkewTorus()
    if kind == "AffineTorus":
        return AffineTorus(params["matrix"], params.get("offset"))
    if kind == "FullShift":
        return FullShift(params.get("k", 2), params.get("direction", 1))
    if kind == "Subshift":
        from .symbolic import minimal_subshift_with_entropy

        sh = minimal_subshift_with_entropy(params["target"], params.get("levels", 3), params.get("tol", 0.02))
        return SubshiftSystem(sh, params.get("direction", 1))
    if kind == "Product":
        return Product([system_from_json(f) for f in params["factors"]])
    if kind == "Inverse":
        return system_from_json(params["system"]).inverse()
    raise UsageError(f"unknown system kind {kind!r}")


def point_to_json(p):
    if isinstance(p, SymbolSequence):
        return {"word": p.word.tolist(), "origin": p.origin, "left": p.left.tolist(), "right": p.right.tolist()}
    if isinstance(p, tuple) and p and not isinstance(p[0], (int, float)):
        return {"product": [point_to_json(x) for x in p]}
    return [float(v) for v in p]


def point_from_json(obj):
    if isinstance(obj, dict) and "word" in obj:
        return SymbolSequence(tuple(obj["word"]), obj.get("origin", 0),
                              tuple(obj.get("left", (0,))), tuple(obj.get("right", (0,))))
    if isinstance(obj, dict) and "product" in obj:
        return tuple(point_from_json(x) for x in obj["product"])
    return tuple(float(v) % 1.0 for v in obj)
