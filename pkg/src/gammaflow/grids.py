"""Cube grids, skeleta, dual cells, shift selection and deformation onto the dual 1-skeleton.

Coordinates are handled in lattice units ``u = (x - a) / ell`` so that cube
faces sit on integer planes and dual vertices on half-integers.

The deformation map ``phi`` is the two-stage radial projection on the dual
grid: inside the dual cube around the nearest primal vertex, project from
that vertex onto the dual cube boundary; inside the dual face reached, project
from its center (a primal edge midpoint) onto the face boundary.  It is
defined off the primal 1-skeleton, sends every open primal 2-face to its
center and every primal cube into the star of dual half-edges at its center.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .currents import BoxDomain, OneCurrent

MARGIN = 1e-3
PILOTS = 64
MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class GridSpec:
    ell: float
    a: tuple
    d: int = 3

    def __post_init__(self):
        if self.ell <= 0:
            raise ValueError("cube side must be positive")
        a = tuple(float(v) for v in self.a)
        if len(a) != self.d:
            raise ValueError("shift has the wrong dimension")
        object.__setattr__(self, "a", a)

    def dual(self) -> "GridSpec":
        return GridSpec(self.ell, tuple(v + self.ell / 2 for v in self.a), self.d)

    def to_lattice(self, x) -> np.ndarray:
        return (np.asarray(x, float) - np.asarray(self.a)) / self.ell

    def to_world(self, u) -> np.ndarray:
        return np.asarray(self.a) + self.ell * np.asarray(u, float)

    def cube_of(self, x) -> tuple:
        return tuple(int(v) for v in np.floor(self.to_lattice(x)))


@dataclass(frozen=True)
class CellRef:
    """An ``h``-cell: lowest corner ``index`` and the axes it spans.

    ``on_dual`` marks cells of the dual grid ``G(ell, a + ell/2)``.
    """
    h: int
    index: tuple
    axes: tuple
    on_dual: bool = False

    def __post_init__(self):
        if len(self.axes) != self.h or tuple(sorted(set(self.axes))) != tuple(self.axes):
            raise ValueError("axes must be h increasing distinct axes")

    @property
    def d(self) -> int:
        return len(self.index)

    def dual(self) -> "CellRef":
        d = self.d
        comp = tuple(i for i in range(d) if i not in self.axes)
        span = np.isin(np.arange(d), self.axes).astype(int)
        if not self.on_dual:
            idx = tuple(int(v) for v in np.asarray(self.index) - 1 + span)
        else:
            idx = tuple(int(v) for v in np.asarray(self.index) + span)
        return CellRef(d - self.h, idx, comp, not self.on_dual)

    def center(self, grid: GridSpec) -> np.ndarray:
        span = np.isin(np.arange(self.d), self.axes)
        u = np.asarray(self.index, float) + 0.5 * span
        if self.on_dual:
            u = u + 0.5
        return grid.to_world(u)


def _plane_distances(x, grid: GridSpec) -> np.ndarray:
    u = grid.to_lattice(x)
    f = u - np.floor(u)
    return np.minimum(f, 1 - f) * grid.ell


def skeleton_distance(x, grid: GridSpec, h: int) -> float:
    """Distance from ``x`` to the ``h``-skeleton: keep the ``d-h`` nearest planes."""
    if not 0 <= h <= grid.d:
        raise ValueError("skeleton dimension out of range")
    r = np.sort(_plane_distances(x, grid))
    return float(math.sqrt(np.sum(r[: grid.d - h] ** 2)))


def _skeleton_distance_many(X: np.ndarray, grid: GridSpec, h: int) -> np.ndarray:
    u = (X - np.asarray(grid.a)) / grid.ell
    f = u - np.floor(u)
    r = np.sort(np.minimum(f, 1 - f) * grid.ell, axis=-1)
    return np.sqrt(np.sum(r[..., : grid.d - h] ** 2, axis=-1))


# --- curve integrals -------------------------------------------------------

def _curve_nodes(curve: OneCurrent, ell: float, per_cell: int = 256):
    """Composite 3-point Gauss nodes along the curve, step about ``ell/per_cell``."""
    g = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
    w = np.array([5 / 9, 8 / 9, 5 / 9])
    pts, wts = [], []
    for a, b, m in curve:
        a, b = np.asarray(a), np.asarray(b)
        L = float(np.linalg.norm(b - a))
        n = max(1, math.ceil(L / ell * per_cell))
        t0 = np.arange(n) / n
        t = (t0[:, None] + (g[None, :] + 1) / (2 * n)).ravel()
        pts.append(a + t[:, None] * (b - a))
        wts.append(np.tile(w, n) * L / (2 * n) * abs(m))
    return np.concatenate(pts), np.concatenate(wts)


def curve_skeleton_integral(curve: OneCurrent, grid: GridSpec, nodes=None) -> tuple[float, float]:
    """``int_curve dist(x, R_1)^{-1}`` and the minimum distance of the curve to ``R_1``."""
    X, W = nodes if nodes is not None else _curve_nodes(curve, grid.ell)
    dist = _skeleton_distance_many(X, grid, 1)
    # the minimum over the polygon itself, per segment, for the margin test
    dmin = min(_segment_min_edge_distance(np.asarray(a), np.asarray(b), grid) for a, b, _ in curve)
    return float(np.sum(W / np.maximum(dist, 1e-300))), dmin


def _segment_min_edge_distance(a, b, grid: GridSpec) -> float:
    # distance between the segment and each grid line it can approach: a line
    # along axis k at (j0, j1) in the other two coordinates; the segment's
    # projection to those coordinates is a 2-D segment, so the distance is a
    # 2-D point-segment distance
    ua, ub = grid.to_lattice(a), grid.to_lattice(b)
    best = math.inf
    d = grid.d
    for k in range(d):
        o = [i for i in range(d) if i != k]
        pa, pb = ua[o], ub[o]
        lo = np.floor(np.minimum(pa, pb)).astype(int)
        hi = np.ceil(np.maximum(pa, pb)).astype(int)
        seg = pb - pa
        L2 = float(seg @ seg)
        for q in itertools.product(*[range(l, h + 1) for l, h in zip(lo, hi)]):
            q = np.asarray(q, float)
            t = 0.0 if L2 == 0 else min(1.0, max(0.0, float((q - pa) @ seg) / L2))
            best = min(best, float(np.linalg.norm(pa + t * seg - q)))
    return best * grid.ell


@dataclass
class ShiftDiagnostics:
    pilot_mean: float
    threshold: float
    attempts: int
    margin_rejections: int
    integral_rejections: int
    expected_rate: float
    integral: float
    min_distance: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


class ShiftSampler:
    """Calibrated acceptance test for grid shifts of a fixed curve.

    Shift number ``k`` is drawn from a generator keyed by ``(seed, stream, k)``
    so every sample is reproducible independently of evaluation order.
    """

    def __init__(self, curve: OneCurrent, ell: float, delta: float, seed: int = 0):
        if curve.dim != 3:
            raise ValueError("shift selection works on curves in R^3")
        if not delta > 0:
            raise ValueError("delta must be positive")
        self.curve, self.ell, self.delta, self.seed = curve, float(ell), float(delta), int(seed)
        self.nodes = _curve_nodes(curve, self.ell)
        pilots = [self.integral(self.shift(0, k))[0] for k in range(PILOTS)]
        self.pilot_mean = float(np.mean(pilots))
        # the threshold (C_emp/delta) * length/ell with C_emp = 2 * mean * ell / length
        self.threshold = 2.0 * self.pilot_mean / self.delta

    def shift(self, stream: int, k: int) -> tuple:
        rng = np.random.default_rng([self.seed, stream, k])
        return tuple(float(v) for v in rng.uniform(0.0, self.ell, 3))

    def integral(self, a) -> tuple[float, float]:
        return curve_skeleton_integral(self.curve, GridSpec(self.ell, a), self.nodes)

    def verdict(self, a) -> tuple[str, float, float]:
        val, dmin = self.integral(a)
        if dmin < MARGIN * self.ell:
            return "margin", val, dmin
        if val > self.threshold:
            return "integral", val, dmin
        return "ok", val, dmin


def select_shift(curve: OneCurrent, domain: Optional[BoxDomain], ell: float, delta: float,
                 seed: int = 0) -> tuple[tuple, ShiftDiagnostics]:
    """Rejection-sample a grid shift meeting the transversality margin and integral bound."""
    if domain is not None:
        for a, b, _ in curve:
            if not (domain.contains(a) and domain.contains(b)):
                raise ValueError("curve leaves the domain")
    s = ShiftSampler(curve, ell, delta, seed)
    rej = {"margin": 0, "integral": 0}
    for k in range(MAX_REJECTIONS + 1):
        a = s.shift(1, k)
        v, val, dmin = s.verdict(a)
        if v == "ok":
            return a, ShiftDiagnostics(s.pilot_mean, s.threshold, k + 1, rej["margin"], rej["integral"],
                                       delta / (2 + 2 * delta), val, dmin)
        rej[v] += 1
    raise RuntimeError("pathological curve/grid ratio")


def acceptance_frequency(curve: OneCurrent, ell: float, delta: float, samples: int = 1000, seed: int = 0) -> float:
    s = ShiftSampler(curve, ell, delta, seed)
    ok = sum(s.verdict(s.shift(2, k))[0] == "ok" for k in range(samples))
    return ok / samples


# --- crossings and intersection numbers ------------------------------------

@dataclass(frozen=True)
class Crossing:
    seg: int
    t: float
    axis: int
    plane: int
    sign: int
    point: tuple  # lattice units, exact integer along ``axis``


def _crossings(curve_pts: np.ndarray, grid: GridSpec) -> list[Crossing]:
    """Crossings of a closed polygon (vertex list) with the integer planes, in curve order."""
    out = []
    n = len(curve_pts)
    U = grid.to_lattice(curve_pts)
    if np.any(np.abs(U - np.rint(U)) < 1e-12):
        raise ValueError("curve vertex on a grid plane: re-shift grid")
    for s in range(n):
        ua, ub = U[s], U[(s + 1) % n]
        local = []
        for ax in range(grid.d):
            if ua[ax] == ub[ax]:
                continue
            lo, hi = sorted((ua[ax], ub[ax]))
            for k in range(math.floor(lo) + 1, math.floor(hi) + 1):
                t = (k - ua[ax]) / (ub[ax] - ua[ax])
                p = ua + t * (ub - ua)
                p[ax] = k
                local.append(Crossing(s, t, ax, k, 1 if ub[ax] > ua[ax] else -1, tuple(p)))
        local.sort(key=lambda c: c.t)
        out.extend(local)
    return out


def _polygon_vertices(curve: OneCurrent) -> np.ndarray:
    """Vertices of a closed polygon stored as a OneCurrent, in traversal order."""
    segs = [(tuple(a), tuple(b), m) for a, b, m in curve]
    if any(abs(m) != 1 for _, _, m in segs):
        raise ValueError("polygon segments must have multiplicity +-1")
    nxt = {}
    for a, b, m in segs:
        s, e = (a, b) if m > 0 else (b, a)
        if s in nxt:
            raise ValueError("curve is not a simple closed polygon")
        nxt[s] = e
    start = segs[0][0] if segs[0][2] > 0 else segs[0][1]
    order = [start]
    while True:
        e = nxt.get(order[-1])
        if e is None:
            raise ValueError("curve is not closed")
        if e == start:
            break
        order.append(e)
    if len(order) != len(segs):
        raise ValueError("curve has more than one component")
    return np.asarray(order, float)


def intersection_numbers(curve: OneCurrent, grid: GridSpec) -> dict:
    """Signed crossings per 2-cell, keyed ``(ix, iy, iz, normal_axis)``.

    The 2-cell normal to ``axis`` at plane ``k`` has lowest corner with
    ``index[axis] = k`` and the floor of the crossing point elsewhere.
    """
    out = defaultdict(int)
    for a, b, m in curve:
        ua, ub = grid.to_lattice(a), grid.to_lattice(b)
        for ax in range(grid.d):
            if ua[ax] == ub[ax]:
                if abs(ua[ax] - round(ua[ax])) < MARGIN:
                    raise ValueError("tangential crossing within margin")
                continue
            lo, hi = sorted((ua[ax], ub[ax]))
            for k in range(math.floor(lo) + 1, math.floor(hi) + 1):
                if min(abs(k - lo), abs(hi - k)) < 1e-12:
                    raise ValueError("curve vertex on a grid plane: re-shift grid")
                t = (k - ua[ax]) / (ub[ax] - ua[ax])
                p = ua + t * (ub - ua)
                rest = [p[i] for i in range(grid.d) if i != ax]
                if min(abs(v - round(v)) for v in rest) < MARGIN:
                    raise ValueError("tangential crossing within margin")
                idx = [int(math.floor(v)) for v in p]
                idx[ax] = k
                # tangent . normal gives the orientation
                out[(*idx, ax)] += int(m) * (1 if ub[ax] > ua[ax] else -1)
    return {k: v for k, v in sorted(out.items()) if v}


# --- the deformation map ---------------------------------------------------

def phi_lattice(u: np.ndarray) -> np.ndarray:
    """Two-stage radial projection in lattice units (see module docstring)."""
    u = np.atleast_2d(np.asarray(u, float))
    V = np.rint(u)
    w = u - V
    mw = np.max(np.abs(w), axis=1)
    if np.any(mw == 0):
        raise ValueError("point at a grid vertex: re-shift grid")
    y = V + w * (0.5 / mw)[:, None]
    ax = np.argmax(np.abs(w), axis=1)
    rows = np.arange(len(u))
    f = V.copy()
    f[rows, ax] += 0.5 * np.sign(w[rows, ax])
    r = y - f
    mr = np.max(np.abs(r), axis=1)
    if np.any(mr == 0):
        raise ValueError("point on a grid edge: re-shift grid")
    return f + r * (0.5 / mr)[:, None]


def phi(x, grid: GridSpec) -> np.ndarray:
    return grid.to_world(phi_lattice(grid.to_lattice(x)))


def _star_position(z: np.ndarray, cube: tuple):
    """Which half-edge of the star of ``cube`` holds the lattice point ``z``.

    Returns ``(axis, side)`` with side in {-1, +1}, or None at the center.
    """
    c = np.asarray(cube, float) + 0.5
    r = z - c
    k = int(np.argmax(np.abs(r)))
    if np.abs(r[k]) == 0:
        return None
    off = np.delete(np.abs(r), k)
    if np.any(off > 1e-9) or abs(r[k]) > 0.5 + 1e-12:
        raise AssertionError("image left the star of its cube")
    return k, int(np.sign(r[k]))


def deform_to_dual(curve: OneCurrent, grid: GridSpec, V: Optional[BoxDomain] = None) -> OneCurrent:
    """Push a closed polygon in R^3 forward by ``phi`` onto the dual 1-skeleton.

    The polygon is cut at its crossings with the cube faces; ``phi`` sends
    each crossing point to a face center and each piece into the star of its
    cube, so the image of a piece is the tree path between the two face
    centers through the cube center.  Half-edges are then merged into whole
    dual edges.
    """
    if grid.d != 3:
        raise ValueError("deformation is implemented in R^3")
    P = _polygon_vertices(curve)
    if V is not None:
        need = 2 * grid.ell * math.sqrt(3)
        if np.min(V.boundary_distance(P)) < need:
            raise ValueError("curve must stay 2*ell*sqrt(3) inside the domain")
    for s in range(len(P)):
        if _segment_min_edge_distance(P[s], P[(s + 1) % len(P)], grid) < MARGIN * grid.ell:
            raise ValueError("curve too close to the 1-skeleton: re-shift grid")
    X = _crossings(P, grid)
    half = defaultdict(int)  # (cube, axis, side) -> multiplicity oriented along +axis
    if X:
        U = grid.to_lattice(P)
        for k, cin in enumerate(X):
            cout = X[(k + 1) % len(X)]
            mid = _piece_midpoint(U, cin, cout)
            cube = tuple(int(v) for v in np.floor(mid))
            zin, zmid, zout = phi_lattice(np.array([cin.point, mid, cout.point]))
            pin = _star_position(zin, cube)
            pout = _star_position(zout, cube)
            if pin is None or pout is None or abs(zin - np.asarray(cube) - 0.5).max() != 0.5 \
                    or abs(zout - np.asarray(cube) - 0.5).max() != 0.5:
                raise AssertionError("crossing not mapped to a face center")
            _star_position(zmid, cube)
            # path: face(in) -> center -> face(out)
            half[(cube, *pin)] += -pin[1]
            half[(cube, *pout)] += pout[1]
    segs = []
    faces = defaultdict(dict)
    for (cube, ax, side), m in half.items():
        if not m:
            continue
        lower = list(cube)
        if side > 0:
            faces[(tuple(lower), ax)]["lo"] = m
        else:
            lower[ax] -= 1
            faces[(tuple(lower), ax)]["hi"] = m
    for (lower, ax), mm in sorted(faces.items()):
        if mm.get("lo", 0) != mm.get("hi", 0):
            raise AssertionError("deformed chain has boundary at a face center")
        upper = list(lower)
        upper[ax] += 1
        a = tuple(float(v) for v in grid.to_world(np.asarray(lower) + 0.5))
        b = tuple(float(v) for v in grid.to_world(np.asarray(upper) + 0.5))
        segs.append((a, b, mm["lo"]))
    return OneCurrent(segs, dim=3)


def _piece_midpoint(U, cin: Crossing, cout: Crossing) -> np.ndarray:
    """A point of the polygon strictly between two consecutive crossings."""
    n = len(U)
    if cin.seg == cout.seg and cout.t > cin.t:
        t = 0.5 * (cin.t + cout.t)
        return U[cin.seg] + t * (U[(cin.seg + 1) % n] - U[cin.seg])
    # the next vertex after the entry crossing lies inside the same cube
    return U[(cin.seg + 1) % n]


def dual_edge_multiplicities(S: OneCurrent, grid: GridSpec) -> dict:
    """Multiplicity of each dual edge, keyed by its primal 2-cell ``(ix, iy, iz, axis)``."""
    out = {}
    for a, b, m in S:
        ua, ub = grid.to_lattice(a) - 0.5, grid.to_lattice(b) - 0.5
        ax = int(np.argmax(np.abs(ub - ua)))
        idx = np.rint(np.minimum(ua, ub)).astype(int)
        # the primal face sits on the plane between the two cube centers
        idx[ax] += 1
        key = (*idx.tolist(), ax)
        out[key] = out.get(key, 0) + int(m) * (1 if ub[ax] > ua[ax] else -1)
    return {k: v for k, v in sorted(out.items()) if v}


# --- distance integrals ----------------------------------------------------

def _dist_to_segments(X, segs):
    best = np.full(len(X), np.inf)
    for a, b in segs:
        a, b = np.asarray(a, float), np.asarray(b, float)
        ab = b - a
        L2 = float(ab @ ab)
        t = np.zeros(len(X)) if L2 == 0 else np.clip((X - a) @ ab / L2, 0, 1)
        best = np.minimum(best, np.linalg.norm(X - (a + t[:, None] * ab), axis=1))
    return best


def distance_integral(segments: Sequence, p: float, t: float, samples: int = 2 ** 18, seed: int = 0) -> float:
    """Quasi-Monte-Carlo estimate of ``int_{dist(x,S) < t} dist(x, S)^{-p} dx``.

    ``segments`` is a list of ``(a, b)`` pairs in R^d (``a == b`` for points).
    """
    from scipy.stats import qmc
    segs = [(np.asarray(a, float), np.asarray(b, float)) for a, b in segments]
    d = len(segs[0][0])
    pts = np.concatenate([np.stack(s) for s in segs])
    lo, hi = pts.min(0) - t, pts.max(0) + t
    # codimension of the set: points d, segments d - 1
    codim = d if all(np.array_equal(a, b) for a, b in segs) else d - 1
    if not p < codim:
        raise ValueError("p must be below the codimension of S")
    if not t > 0:
        raise ValueError("t must be positive")
    X = lo + (hi - lo) * qmc.Sobol(d, scramble=True, seed=seed).random(samples)
    r = _dist_to_segments(X, segs)
    hit = r < t
    if hit.sum() < 1000:
        raise RuntimeError("sample starvation: fewer than 1000 points in the neighbourhood")
    vals = np.where(hit, np.maximum(r, 1e-300) ** (-p), 0.0)
    return float(np.prod(hi - lo) * vals.mean())


def distance_integral_scaling(segments: Sequence, p: float, t: float, samples: int = 2 ** 18,
                              seed: int = 0) -> float:
    """Ratio of the integral at ``t`` and ``t/2``; about ``2^(codim - p)``."""
    return distance_integral(segments, p, t, samples, seed) / distance_integral(segments, p, t / 2, samples, seed)
