"""Integral 0- and 1-currents on axis-aligned boxes.

A :class:`ZeroCurrent` is a finite signed sum of Dirac masses with integer
weights, a :class:`OneCurrent` a finite sum of oriented segments.  Both are
immutable and kept in a canonical (merged, sorted) form so that equality is
structural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

Point = tuple  # tuple[float, ...]


def _as_point(x) -> Point:
    pt = tuple(float(c) for c in x)
    if not all(math.isfinite(c) for c in pt):
        raise ValueError(f"non-finite coordinates: {pt}")
    return pt


@dataclass(frozen=True)
class Constants:
    """Sphere constants for target dimension ``n``."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("target dimension must be >= 2")

    @cached_property
    def omega(self) -> float:
        # H^{n-1} measure of the unit sphere in R^n
        return 2.0 * math.pi ** (self.n / 2) / math.gamma(self.n / 2)

    @cached_property
    def gamma(self) -> float:
        return self.omega / self.n

    @cached_property
    def limit(self) -> float:
        """Energy per unit mass of the limit current."""
        return (self.n - 1) ** (self.n / 2) * self.omega


@dataclass(frozen=True)
class BoxDomain:
    lo: Point
    hi: Point

    def __post_init__(self):
        lo, hi = _as_point(self.lo), _as_point(self.hi)
        if len(lo) != len(hi) or len(lo) not in (1, 2, 3):
            raise ValueError("box corners must share a dimension in {1, 2, 3}")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate box: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def diameter(self) -> float:
        return math.dist(self.lo, self.hi)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, x) -> np.ndarray | bool:
        """Strict interior membership (points on the boundary are outside)."""
        x = np.asarray(x, dtype=float)
        inside = np.all((x > self.lo) & (x < self.hi), axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def boundary_distance(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        d = np.min(np.minimum(x - self.lo, np.subtract(self.hi, x)), axis=-1)
        return float(d) if np.ndim(d) == 0 else d

    def boundary_foot(self, x) -> Point:
        """Nearest boundary point of an interior point.

        Ties between faces go to the smallest axis, then the lower face.
        """
        x = np.asarray(x, dtype=float)
        best, axis, side = math.inf, 0, 0
        for i in range(self.dim):
            for s, dist in ((0, x[i] - self.lo[i]), (1, self.hi[i] - x[i])):
                if dist < best:
                    best, axis, side = dist, i, s
        foot = list(map(float, x))
        foot[axis] = self.lo[axis] if side == 0 else self.hi[axis]
        return tuple(foot)

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_json(cls, obj: dict) -> "BoxDomain":
        return cls(tuple(obj["lo"]), tuple(obj["hi"]))


class ZeroCurrent:
    """Finite sum of integer-weighted Dirac masses.

    Co-located atoms are merged on construction and zero weights dropped,
    so two currents compare equal iff they act identically on test functions.
    """

    __slots__ = ("_atoms", "dim")

    def __init__(self, atoms: Iterable[tuple[Sequence[float], int]] = (), dim: Optional[int] = None):
        merged: dict[Point, int] = {}
        for x, m in atoms:
            if int(m) != m:
                raise ValueError(f"multiplicity must be an integer, got {m!r}")
            pt = _as_point(x)
            merged[pt] = merged.get(pt, 0) + int(m)
        self._atoms = tuple(sorted((p, m) for p, m in merged.items() if m != 0))
        dims = {len(p) for p, _ in self._atoms}
        if len(dims) > 1:
            raise ValueError("mixed point dimensions")
        if dim is None:
            dim = dims.pop() if dims else 2
        elif dims and dims != {dim}:
            raise ValueError(f"atoms are not {dim}-dimensional")
        self.dim = dim

    @property
    def atoms(self) -> tuple[tuple[Point, int], ...]:
        return self._atoms

    def __len__(self):
        return len(self._atoms)

    def __iter__(self):
        return iter(self._atoms)

    def __bool__(self):
        return bool(self._atoms)

    def __eq__(self, other):
        if not isinstance(other, ZeroCurrent):
            return NotImplemented
        return self._atoms == other._atoms

    def __hash__(self):
        return hash(self._atoms)

    def __repr__(self):
        return f"ZeroCurrent({list(self._atoms)!r})"

    def __add__(self, other: "ZeroCurrent") -> "ZeroCurrent":
        return ZeroCurrent(self._atoms + other._atoms, dim=self.dim)

    def __neg__(self) -> "ZeroCurrent":
        return ZeroCurrent(((p, -m) for p, m in self._atoms), dim=self.dim)

    def __sub__(self, other: "ZeroCurrent") -> "ZeroCurrent":
        return self + (-other)

    @property
    def points(self) -> np.ndarray:
        return np.array([p for p, _ in self._atoms], dtype=float).reshape(-1, self.dim)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([m for _, m in self._atoms], dtype=np.int64)

    def restrict(self, domain: BoxDomain) -> "ZeroCurrent":
        """Atoms lying strictly inside ``domain``."""
        return ZeroCurrent(((p, m) for p, m in self._atoms if domain.contains(p)), dim=self.dim)

    def total(self) -> int:
        return sum(m for _, m in self._atoms)

    def positive_mass(self) -> int:
        return sum(m for _, m in self._atoms if m > 0)

    def negative_mass(self) -> int:
        return -sum(m for _, m in self._atoms if m < 0)


class OneCurrent:
    """Finite sum of oriented segments ``a -> b`` with integer multiplicity.

    Segments are canonicalised so that ``a < b`` lexicographically (flipping
    the sign when needed) and identical supports are merged.
    """

    __slots__ = ("_segments", "dim")

    def __init__(self, segments: Iterable[tuple[Sequence[float], Sequence[float], int]] = (),
                 dim: Optional[int] = None):
        merged: dict[tuple[Point, Point], int] = {}
        for a, b, m in segments:
            if int(m) != m:
                raise ValueError(f"multiplicity must be an integer, got {m!r}")
            a, b, m = _as_point(a), _as_point(b), int(m)
            if a == b:
                raise ValueError(f"degenerate segment at {a}")
            if len(a) != len(b):
                raise ValueError("segment endpoints differ in dimension")
            if b < a:
                a, b, m = b, a, -m
            merged[(a, b)] = merged.get((a, b), 0) + m
        self._segments = tuple(sorted((a, b, m) for (a, b), m in merged.items() if m != 0))
        dims = {len(a) for a, _, _ in self._segments}
        if len(dims) > 1:
            raise ValueError("mixed point dimensions")
        if dim is None:
            dim = dims.pop() if dims else 2
        self.dim = dim

    @property
    def segments(self) -> tuple[tuple[Point, Point, int], ...]:
        return self._segments

    def __len__(self):
        return len(self._segments)

    def __iter__(self):
        return iter(self._segments)

    def __bool__(self):
        return bool(self._segments)

    def __eq__(self, other):
        if not isinstance(other, OneCurrent):
            return NotImplemented
        return self._segments == other._segments

    def __hash__(self):
        return hash(self._segments)

    def __repr__(self):
        return f"OneCurrent({list(self._segments)!r})"

    def __add__(self, other: "OneCurrent") -> "OneCurrent":
        return OneCurrent(self._segments + other._segments, dim=self.dim)

    def __neg__(self) -> "OneCurrent":
        return OneCurrent(((a, b, -m) for a, b, m in self._segments), dim=self.dim)

    def __sub__(self, other: "OneCurrent") -> "OneCurrent":
        return self + (-other)

    def lengths(self) -> np.ndarray:
        if not self._segments:
            return np.zeros(0)
        a = np.array([s[0] for s in self._segments])
        b = np.array([s[1] for s in self._segments])
        return np.linalg.norm(b - a, axis=1)


def polygon(vertices: Sequence[Sequence[float]], closed: bool = True) -> OneCurrent:
    """Unit-multiplicity polygonal chain through ``vertices``."""
    verts = [_as_point(v) for v in vertices]
    pairs = list(zip(verts[:-1], verts[1:]))
    if closed:
        pairs.append((verts[-1], verts[0]))
    return OneCurrent((a, b, 1) for a, b in pairs)


def mass_zero(T: ZeroCurrent, domain: Optional[BoxDomain] = None) -> float:
    atoms = T.atoms if domain is None else T.restrict(domain).atoms
    return float(sum(abs(m) for _, m in atoms))


def mass_one(S: OneCurrent) -> float:
    if not S:
        return 0.0
    return float(np.dot(np.abs([m for _, _, m in S]), S.lengths()))


def boundary_one(S: OneCurrent, domain: Optional[BoxDomain] = None) -> ZeroCurrent:
    """Boundary of ``S`` inside ``domain``: ``+m`` at each head, ``-m`` at each tail.

    Endpoints on or outside the boundary of ``domain`` contribute nothing.
    """
    atoms = []
    for a, b, m in S:
        if domain is None or domain.contains(b):
            atoms.append((b, m))
        if domain is None or domain.contains(a):
            atoms.append((a, -m))
    return ZeroCurrent(atoms, dim=S.dim)


@dataclass(frozen=True)
class PairChoice:
    """A minimising admissible pair for the pairing functional.

    ``y`` carries the positive end, ``z`` the negative end; a side matched to
    the boundary is replaced by its nearest boundary point and flagged.
    """

    y: Point
    z: Point
    distance: float
    y_on_boundary: bool = False
    z_on_boundary: bool = False

    def segment(self) -> tuple[Point, Point, int]:
        # oriented so that its boundary is delta_y - delta_z
        return (self.z, self.y, 1)


def pair_min(T: ZeroCurrent, domain: BoxDomain) -> Optional[PairChoice]:
    """Minimise ``|y - z|`` over ``T+ x T-``, ``T+ x dOmega`` and ``dOmega x T-``.

    Same-sign pairs are never admissible.  Among minimisers the pair with the
    lexicographically smallest ``(y, z)`` is returned.
    """
    inner = T.restrict(domain)
    if not inner:
        return None
    pts, mult = inner.points, inner.multiplicities
    pos, neg = pts[mult > 0], pts[mult < 0]
    cands: list[tuple[float, Point, Point, bool, bool]] = []
    if len(pos) and len(neg):
        d = np.linalg.norm(pos[:, None, :] - neg[None, :, :], axis=-1)
        dmin = d.min()
        for i, j in zip(*np.nonzero(d == dmin)):
            cands.append((float(dmin), tuple(pos[i]), tuple(neg[j]), False, False))
    for y in pos:
        cands.append((domain.boundary_distance(y), tuple(y), domain.boundary_foot(y), False, True))
    for z in neg:
        cands.append((domain.boundary_distance(z), domain.boundary_foot(z), tuple(z), True, False))
    best = min(c[0] for c in cands)
    dist, y, z, yb, zb = min((c for c in cands if c[0] == best), key=lambda c: (c[1], c[2]))
    return PairChoice(tuple(map(float, y)), tuple(map(float, z)), float(dist), yb, zb)
