"""Geometry of the discrete torus Z_N^2.

Sites are addressed either as ``(i, j)`` pairs or by the flat index
``i * N + j``.  Everything here is a pure function of its inputs.
"""
from __future__ import annotations

import math
from typing import Iterable, NamedTuple

import numpy as np


class RadiusTooLarge(ValueError):
    pass


class EmptyRegion(ValueError):
    pass


class FullTorus(ValueError):
    pass


class TorusPoint(NamedTuple):
    i: int
    j: int

    @classmethod
    def wrap(cls, N: int, i: int, j: int) -> "TorusPoint":
        return cls(int(i) % N, int(j) % N)

    def index(self, N: int) -> int:
        return self.i * N + self.j


ORIGIN = TorusPoint(0, 0)

# skeleton moves, indexed by the direction byte fed to the kernels
STEPS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=np.int64)


def as_point(N: int, x) -> TorusPoint:
    if isinstance(x, (int, np.integer)):
        return TorusPoint(int(x) // N, int(x) % N)
    return TorusPoint.wrap(N, x[0], x[1])


class PointSet:
    """A set of sites of Z_N^2, stored as sorted flat indices.

    Membership is an O(1) lookup in a boolean mask.
    """

    __slots__ = ("N", "indices", "_mask")

    def __init__(self, N: int, indices: Iterable[int]):
        self.N = int(N)
        idx = np.unique(np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices,
                                   dtype=np.int64))
        if idx.size and (idx[0] < 0 or idx[-1] >= N * N):
            raise ValueError("site index outside the torus")
        self.indices = idx
        self.indices.setflags(write=False)
        self._mask = None

    @classmethod
    def from_points(cls, N: int, points: Iterable) -> "PointSet":
        return cls(N, [as_point(N, p).index(N) for p in points])

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "PointSet":
        N = mask.shape[0]
        return cls(N, np.flatnonzero(mask.ravel()))

    @property
    def mask(self) -> np.ndarray:
        """Boolean (N, N) membership mask."""
        if self._mask is None:
            m = np.zeros(self.N * self.N, dtype=bool)
            m[self.indices] = True
            m.setflags(write=False)
            self._mask = m.reshape(self.N, self.N)
        return self._mask

    def points(self) -> list[TorusPoint]:
        return [TorusPoint(int(k) // self.N, int(k) % self.N) for k in self.indices]

    def __len__(self) -> int:
        return int(self.indices.size)

    def __contains__(self, x) -> bool:
        p = as_point(self.N, x)
        return bool(self.mask[p.i, p.j])

    def __iter__(self):
        return iter(self.points())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self.N == other.N and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.N, self.indices.tobytes()))

    def __or__(self, other: "PointSet") -> "PointSet":
        _same_torus(self, other)
        return PointSet(self.N, np.union1d(self.indices, other.indices))

    def __and__(self, other: "PointSet") -> "PointSet":
        _same_torus(self, other)
        return PointSet(self.N, np.intersect1d(self.indices, other.indices))

    def __sub__(self, other: "PointSet") -> "PointSet":
        _same_torus(self, other)
        return PointSet(self.N, np.setdiff1d(self.indices, other.indices))

    def complement(self) -> "PointSet":
        return PointSet.from_mask(~self.mask)

    def __repr__(self) -> str:
        return f"PointSet(N={self.N}, size={len(self)})"


def _same_torus(a: PointSet, b: PointSet) -> None:
    if a.N != b.N:
        raise ValueError(f"point sets live on different tori ({a.N} vs {b.N})")


def wrapped_offsets(N: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Minimal |di|, |dj| from ``x`` to every site, broadcastable to (N, N)."""
    p = as_point(N, x)
    k = np.arange(N, dtype=np.int64)
    di = np.abs(k - p.i)
    dj = np.abs(k - p.j)
    return np.minimum(di, N - di)[:, None], np.minimum(dj, N - dj)[None, :]


def squared_distance_field(N: int, x) -> np.ndarray:
    """Integer squared wrapped distance from ``x`` to every site."""
    di, dj = wrapped_offsets(N, x)
    return di * di + dj * dj


def torus_distance(N: int, x, y) -> float:
    if N < 2:
        raise ValueError("N must be at least 2")
    p, q = as_point(N, x), as_point(N, y)
    a = abs(p.i - q.i)
    b = abs(p.j - q.j)
    a = min(a, N - a)
    b = min(b, N - b)
    return math.sqrt(a * a + b * b)


def ball(N: int, center, r: float) -> PointSet:
    """D(center, r): sites at wrapped distance strictly less than ``r``."""
    if r <= 0:
        raise ValueError("radius must be positive")
    if r >= N / 2:
        raise RadiusTooLarge(f"r={r} must be below N/2={N / 2}")
    d2 = squared_distance_field(N, center)
    # integer squared distances compared against r^2; exact for the strict bound
    return PointSet.from_mask(d2 < r * r)


def neighbours_mask(mask: np.ndarray) -> np.ndarray:
    """Sites adjacent (distance 1) to some site of ``mask``."""
    return (np.roll(mask, 1, 0) | np.roll(mask, -1, 0)
            | np.roll(mask, 1, 1) | np.roll(mask, -1, 1))


def boundary(N: int, A: PointSet) -> PointSet:
    """Exterior sites at distance 1 from ``A``."""
    if len(A) == 0:
        raise EmptyRegion("boundary of an empty set")
    if len(A) == N * N:
        raise FullTorus("the full torus has no boundary")
    m = A.mask
    return PointSet.from_mask(neighbours_mask(m) & ~m)


def ball_boundary(N: int, center, r: float) -> PointSet:
    return boundary(N, ball(N, center, r))


def neighbour_table(N: int) -> np.ndarray:
    """(N*N, 4) flat indices of the neighbours, in ``STEPS`` order."""
    i, j = np.divmod(np.arange(N * N), N)
    out = np.empty((N * N, 4), dtype=np.int64)
    for k, (a, b) in enumerate(STEPS):
        out[:, k] = ((i + a) % N) * N + (j + b) % N
    return out
