"""S^1- and R^2-valued fields sampled on uniform box lattices.

S^1 fields store phases only; the unit vector is always rebuilt from the
phase so ``|u| == 1`` holds to rounding.  Energies use forward differences at
the lower corner of each cell with a one-point quadrature, and differences
of S^1 fields are chords between unit vectors, never wrapped phase
differences, so the energy does not depend on the lift.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from .currents import BoxDomain, OneCurrent

S1 = "S1"
R2 = "R2"


def wrap(theta):
    """Wrap angles to (-pi, pi]."""
    out = np.mod(np.asarray(theta, dtype=float) + np.pi, 2 * np.pi) - np.pi
    out = np.where(out == -np.pi, np.pi, out)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True, eq=False)
class LatticeField:
    domain: BoxDomain
    h: float
    values: np.ndarray
    target: str = S1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        d = self.domain.dim
        if self.target not in (S1, R2):
            raise ValueError(f"unknown target {self.target!r}")
        expect_ndim = d if self.target == S1 else d + 1
        if vals.ndim != expect_ndim or (self.target == R2 and vals.shape[-1] != 2):
            raise ValueError(f"values of shape {vals.shape} do not fit a {d}-D {self.target} field")
        dims = vals.shape[:d]
        span = np.subtract(self.domain.hi, self.domain.lo)
        if not np.allclose(self.h * (np.array(dims) - 1), span, rtol=1e-9, atol=1e-12):
            raise ValueError(f"h*(dims-1) = {self.h * (np.array(dims) - 1)} does not span {span}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.values.shape[:self.dim])

    @property
    def origin(self) -> np.ndarray:
        return np.array(self.domain.lo)

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.domain.lo[axis] + self.h * np.arange(self.dims[axis])

    def node_grid(self) -> list[np.ndarray]:
        return np.meshgrid(*(self.axis_coords(i) for i in range(self.dim)), indexing="ij")

    def cell_centers(self) -> list[np.ndarray]:
        axes = [self.axis_coords(i)[:-1] + self.h / 2 for i in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def vectors(self) -> np.ndarray:
        if self.target == R2:
            return self.values
        return np.stack([np.cos(self.values), np.sin(self.values)], axis=-1)

    def rotated(self, phi: float) -> "LatticeField":
        if self.target == S1:
            return LatticeField(self.domain, self.h, wrap(self.values + phi), S1)
        c, s = math.cos(phi), math.sin(phi)
        v = self.values
        return LatticeField(self.domain, self.h,
                            np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]], -1), R2)


def box_lattice(lo: Sequence[float], hi: Sequence[float], h: float) -> BoxDomain:
    """Box whose extent is an integer number of steps ``h``, anchored at ``lo``."""
    lo = np.asarray(lo, float)
    n = np.round((np.asarray(hi, float) - lo) / h).astype(int)
    if np.any(n < 1):
        raise ValueError("box narrower than one lattice step")
    return BoxDomain(tuple(lo), tuple(lo + n * h))


# ---------------------------------------------------------------- energy

def phase_cell_sq_grad(theta: np.ndarray, h: float) -> np.ndarray:
    """Squared forward-difference gradient per cell of a phase array.

    Uses ``|e^{i a} - e^{i b}|^2 = 4 sin^2((a - b) / 2)`` which is exact for
    the chord and insensitive to 2 pi jumps of the stored phase.
    """
    d = theta.ndim
    corner = tuple(slice(0, -1) for _ in range(d))
    base = theta[corner]
    g2 = np.zeros(base.shape)
    for i in range(d):
        sl = tuple(slice(1, None) if j == i else slice(0, -1) for j in range(d))
        g2 += np.sin(0.5 * (theta[sl] - base)) ** 2
    return 4.0 * g2 / (h * h)


def vector_cell_sq_grad(vec: np.ndarray, h: float) -> np.ndarray:
    d = vec.ndim - 1
    corner = tuple(slice(0, -1) for _ in range(d))
    base = vec[corner]
    g2 = np.zeros(base.shape[:-1])
    for i in range(d):
        sl = tuple(slice(1, None) if j == i else slice(0, -1) for j in range(d))
        diff = vec[sl] - base
        g2 += np.einsum("...k,...k->...", diff, diff)
    return g2 / (h * h)


def density_from_sq_grad(g2: np.ndarray, p: float, h: float, d: int, variant: bool = False) -> np.ndarray:
    if variant:
        return (1.0 + g2) ** (p / 2) * h ** d
    return g2 ** (p / 2) * h ** d


def check_exponent(p: float) -> None:
    if not 1.0 < p < 2.0:
        raise ValueError(f"exponent p={p} outside (1, 2)")


@dataclass(frozen=True, eq=False)
class EnergyReport:
    p: float
    total: float
    rescaled: float
    density: np.ndarray
    variant: bool = False

    def to_json(self) -> dict:
        return {"p": self.p, "total": self.total, "rescaled": self.rescaled, "variant": self.variant}


Region = Union[None, np.ndarray, Callable[..., np.ndarray]]


def p_energy(fld: LatticeField, p: float, variant: bool = False, region: Region = None) -> EnergyReport:
    """Lattice p-energy of ``fld``; ``rescaled`` is ``(2 - p) * total``.

    ``region`` restricts the sum to a set of cells, given either as a boolean
    array over cells or as a predicate evaluated at cell centers.
    """
    check_exponent(p)
    if min(fld.dims) < 2:
        raise ValueError("need at least 2 nodes per axis")
    if fld.target == S1:
        g2 = phase_cell_sq_grad(fld.values, fld.h)
    else:
        g2 = vector_cell_sq_grad(fld.values, fld.h)
    dens = density_from_sq_grad(g2, p, fld.h, fld.dim, variant)
    if region is not None:
        mask = region(*fld.cell_centers()) if callable(region) else np.asarray(region, bool)
        dens = np.where(mask, dens, 0.0)
    total = float(np.sum(dens))
    return EnergyReport(p, total, (2.0 - p) * total, dens, variant)


def lp_norm(values: np.ndarray, h: float, p: float, d: int) -> float:
    v = np.asarray(values)
    mag = np.linalg.norm(v, axis=-1) if v.ndim > d else np.abs(v)
    return float((np.sum(mag ** p) * h ** d) ** (1.0 / p))


def flat_vortex_energy(n: int, m: int, p: float, delta: float, area: float = 1.0) -> float:
    """Exact energy of ``x'/|x'|`` over ``B^n_delta x A`` with ``H^m(A) = area``."""
    if not p < n:
        raise ValueError("need p < n")
    omega = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    return (n - 1) ** (p / 2) * omega * area * delta ** (n - p) / (n - p)


# ---------------------------------------------------------------- mollification

def mollifier_kernel(eps: float, h: float, d: int) -> np.ndarray:
    """Discretely normalised bump ``exp(-1/(1-|x/eps|^2))`` on the lattice.

    Weights include the cell volume, so ``kernel.sum() == 1``.
    """
    r = int(math.floor(eps / h))
    ax = np.arange(-r, r + 1) * h / eps
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    s = sum(g * g for g in grids)
    k = np.zeros_like(s)
    inside = s < 1.0
    k[inside] = np.exp(-1.0 / (1.0 - s[inside]))
    return k / k.sum()


def mollify(fld: LatticeField, eps: float) -> LatticeField:
    """Convolve with the bump kernel and keep the fully supported interior.

    The caller supplies a field on an enlarged box; the output lives on the
    box shrunk by ``floor(eps/h) * h`` on every side.
    """
    if eps < 2 * fld.h:
        raise ValueError(f"kernel under-resolved: eps={eps} < 2h={2 * fld.h}")
    kern = mollifier_kernel(eps, fld.h, fld.dim)
    r = kern.shape[0] // 2
    if any(n <= 2 * r + 1 for n in fld.dims):
        raise ValueError("field too small for the mollifier margin")
    vec = fld.vectors()
    inner = tuple(slice(r, n - r) for n in fld.dims)
    out = np.stack([ndimage.correlate(vec[..., c], kern, mode="constant")[inner] for c in range(2)], -1)
    norm = np.linalg.norm(out, axis=-1)
    over = norm > 1.0
    out[over] /= norm[over][:, None]
    lo = np.array(fld.domain.lo) + r * fld.h
    hi = lo + (np.array(out.shape[:-1]) - 1) * fld.h
    return LatticeField(BoxDomain(tuple(lo), tuple(hi)), fld.h, out, R2, {"eps": eps})


# ---------------------------------------------------------------- radial projection

def _t_a(x: np.ndarray, a: np.ndarray):
    v = x - a
    r = np.linalg.norm(v, axis=-1)
    if np.any(r < 1e-12):
        raise ValueError("non-regular center: a field value coincides with the projection center")
    proj = np.einsum("...k,k->...", v, a) / r
    t = -proj + np.sqrt(proj * proj + 1.0 - a @ a)
    return v, r, t


def radial_projection(x, a) -> np.ndarray:
    """Project points of the closed unit ball from ``a`` onto the unit circle."""
    x = np.asarray(x, float)
    a = np.asarray(a, float)
    v, r, t = _t_a(x, a)
    return a + (t / r)[..., None] * v


def project_center(fld: LatticeField, a: Sequence[float]) -> LatticeField:
    a = np.asarray(a, float)
    if not np.linalg.norm(a) < 0.125:
        raise ValueError("projection center must satisfy |a| < 1/8")
    if fld.target != R2:
        raise ValueError("project_center expects an R^2-valued field")
    out = radial_projection(fld.values, a)
    return LatticeField(fld.domain, fld.h, np.arctan2(out[..., 1], out[..., 0]), S1,
                        {"center": a.tolist()})


def _quad_corners(vec: np.ndarray) -> np.ndarray:
    """Corner values of each 2-D cell in counter-clockwise order."""
    return np.stack([vec[:-1, :-1], vec[1:, :-1], vec[1:, 1:], vec[:-1, 1:]], axis=-2)


def _segment_point_distance(p0, p1, a):
    d = p1 - p0
    w = a - p0
    L2 = np.einsum("...k,...k->...", d, d)
    t = np.clip(np.einsum("...k,...k->...", w, d) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    return np.linalg.norm(w - t[..., None] * d, axis=-1)


def preimage_count(fld: LatticeField, a: Sequence[float]) -> tuple[int, float]:
    """Number of cells whose bilinear image winds around ``a``.

    Cell edges map to straight segments, so the image of a cell boundary is
    the polygon through its four corner values.  Returns the count (sum of
    absolute windings) and the distance from ``a`` to the nearest image edge.
    """
    if fld.dim != 2 or fld.target != R2:
        raise ValueError("preimage counts are implemented for 2-D R^2 fields")
    a = np.asarray(a, float)
    q = _quad_corners(fld.values) - a
    ang = np.arctan2(q[..., 1], q[..., 0])
    dang = np.roll(ang, -1, axis=-1) - ang
    dang = np.mod(dang + np.pi, 2 * np.pi) - np.pi
    wind = np.rint(dang.sum(-1) / (2 * np.pi)).astype(int)
    p0 = q
    p1 = np.roll(q, -1, axis=-2)
    dist = _segment_point_distance(p0, p1, np.zeros(2)).min()
    return int(np.abs(wind).sum()), float(dist)


def select_projection_center(fld: LatticeField, delta: float, sample_count: int = 32,
                             rng_seed=0, tol: float = 1e-6) -> tuple[np.ndarray, int]:
    """Pick a regular value ``a`` in ``B_delta`` with a below-average preimage.

    Samples ``a`` uniformly in the disk, discards irregular samples (an image
    edge within ``tol``) and returns the first sample whose count is at most
    three times the mean over the regular samples.
    """
    if not 0.0 < delta < 0.125:
        raise ValueError("need 0 < delta < 1/8")
    rng = np.random.default_rng(rng_seed)
    samples = []
    for _ in range(sample_count):
        r = delta * math.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2 * math.pi)
        a = np.array([r * math.cos(phi), r * math.sin(phi)])
        count, dist = preimage_count(fld, a)
        if dist > tol:
            samples.append((a, count))
    if not samples:
        raise ValueError("all sampled centers were irregular; raise sample_count")
    mean = sum(c for _, c in samples) / len(samples)
    for a, c in samples:
        if c <= 3 * mean:
            return a, c
    raise AssertionError("unreachable: some sample is at most the mean")


# ---------------------------------------------------------------- analytic vortices

def _check_off_lattice(points: np.ndarray, domain: BoxDomain, h: float, axes=None) -> None:
    lo = np.array(domain.lo)
    for pt in np.atleast_2d(points):
        k = (pt - lo) / h
        sel = slice(None) if axes is None else list(axes)
        if np.all(np.abs(k - np.round(k))[sel] < 1e-9):
            raise ValueError(f"vortex center {tuple(pt)} sits on a lattice node; shift it off-lattice")


def product_vortex(centers: Sequence[tuple[Sequence[float], int]], domain: BoxDomain, h: float) -> LatticeField:
    """Phase ``sum_i d_i arg(x - a_i)`` on the lattice of ``domain``."""
    pts = np.array([c for c, _ in centers], float).reshape(-1, domain.dim)
    degs = [int(d) for _, d in centers]
    if domain.dim != 2:
        raise ValueError("product vortices live in 2-D domains")
    if not np.all(domain.contains(pts)):
        raise ValueError("vortex centers must lie inside the domain")
    if len({tuple(p) for p in pts}) != len(pts):
        raise ValueError("vortex centers must be distinct")
    _check_off_lattice(pts, domain, h)
    fld0 = LatticeField(domain, h, np.zeros(tuple(np.round(np.subtract(domain.hi, domain.lo) / h).astype(int) + 1)))
    X, Y = fld0.node_grid()
    theta = np.zeros_like(X)
    for (ax, ay), d in zip(pts, degs):
        theta += d * np.arctan2(Y - ay, X - ax)
    return LatticeField(domain, h, wrap(theta), S1,
                        {"kind": "product_vortex", "centers": [[list(map(float, c)), d] for c, d in zip(pts, degs)]})


def axis_vortex_3d(point: Sequence[float], axis: int, domain: BoxDomain, h: float) -> LatticeField:
    """Vortex line through ``point`` along ``e_axis``.

    The phase is the argument of the transverse coordinates taken in cyclic
    order ``(axis+1, axis+2)``, so the line is positively oriented along
    ``+e_axis``.
    """
    if domain.dim != 3 or axis not in (0, 1, 2):
        raise ValueError("axis vortices need a 3-D domain and axis in {0, 1, 2}")
    pt = np.asarray(point, float)
    i, j = (axis + 1) % 3, (axis + 2) % 3
    _check_off_lattice(pt[None, :], domain, h, axes=(i, j))
    dims = tuple(np.round(np.subtract(domain.hi, domain.lo) / h).astype(int) + 1)
    fld0 = LatticeField(domain, h, np.zeros(dims))
    g = fld0.node_grid()
    theta = np.arctan2(g[j] - pt[j], g[i] - pt[i])
    return LatticeField(domain, h, theta, S1,
                        {"kind": "axis_vortex", "point": pt.tolist(), "axis": axis})


def _solid_angle(r1, r2, r3):
    """Signed solid angle of triangles seen from the origin (Van Oosterom-Strackee)."""
    n1 = np.linalg.norm(r1, axis=-1)
    n2 = np.linalg.norm(r2, axis=-1)
    n3 = np.linalg.norm(r3, axis=-1)
    num = np.einsum("...k,...k->...", r1, np.cross(r2, r3))
    den = (n1 * n2 * n3 + np.einsum("...k,...k->...", r1, r2) * n3
           + np.einsum("...k,...k->...", r1, r3) * n2 + np.einsum("...k,...k->...", r2, r3) * n1)
    return 2.0 * np.arctan2(num, den)


def solid_angle_phase(x: np.ndarray, curve: OneCurrent, block: int = 65536) -> np.ndarray:
    """Half the signed solid angle of the cone over ``curve`` seen from ``x``.

    The cone has its apex at the mean of the segment endpoints.  Going once
    around the curve in the right-handed sense changes the value by ``2 pi``.
    """
    x = np.asarray(x, float).reshape(-1, 3)
    segs = curve.segments
    verts = np.array([s[0] for s in segs] + [s[1] for s in segs])
    apex = verts.mean(axis=0)
    out = np.empty(len(x))
    for s in range(0, len(x), block):
        xs = x[s:s + block]
        acc = np.zeros(len(xs))
        for a, b, m in segs:
            acc += m * _solid_angle(apex - xs, np.asarray(a) - xs, np.asarray(b) - xs)
        out[s:s + block] = 0.5 * acc
    return out


def _point_segment_distance(x, a, b):
    return _segment_point_distance(np.asarray(a, float), np.asarray(b, float), x)


def solid_angle_vortex(curve: OneCurrent, domain: BoxDomain, h: float) -> LatticeField:
    if domain.dim != 3 or curve.dim != 3:
        raise ValueError("solid-angle vortices need a 3-D curve and domain")
    from .currents import boundary_one
    if boundary_one(curve):
        raise ValueError("curve must be closed")
    dims = tuple(np.round(np.subtract(domain.hi, domain.lo) / h).astype(int) + 1)
    fld0 = LatticeField(domain, h, np.zeros(dims))
    pts = np.stack([g.ravel() for g in fld0.node_grid()], -1)
    for a, b, _ in curve:
        if np.min(_point_segment_distance(pts, a, b)) < 1e-9 * h:
            raise ValueError("curve passes through a lattice node")
    theta = solid_angle_phase(pts, curve).reshape(dims)
    return LatticeField(domain, h, wrap(theta), S1, {"kind": "solid_angle"})


# ---------------------------------------------------------------- binary I/O

MAGIC = b"SPHF"
VERSION = 1


def write_field(path: Union[str, Path], fld: LatticeField, meta: Optional[dict] = None) -> Path:
    """Write an S^1 field as ``SPHF`` binary plus a ``.json`` sidecar."""
    if fld.target != S1:
        raise ValueError("only S^1 fields (phases) are stored in SPHF files")
    path = Path(path)
    d = fld.dim
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(f"<II{d}I", VERSION, d, *fld.dims))
        fh.write(struct.pack(f"<d{d}d", fld.h, *fld.domain.lo))
        fh.write(np.ascontiguousarray(fld.values, dtype="<f8").tobytes())
    side = {"target": fld.target, "domain": fld.domain.to_json(), "h": fld.h}
    side.update(fld.meta)
    side.update(meta or {})
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(side, indent=2, sort_keys=True))
    return path


def read_field(path: Union[str, Path]) -> LatticeField:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError("not an SPHF file")
    version, d = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"unsupported SPHF version {version}")
    off = 12
    dims = struct.unpack_from(f"<{d}I", raw, off)
    off += 4 * d
    h, *origin = struct.unpack_from(f"<d{d}d", raw, off)
    off += 8 * (d + 1)
    vals = np.frombuffer(raw, dtype="<f8", offset=off).reshape(dims).copy()
    lo = np.array(origin)
    hi = lo + h * (np.array(dims) - 1)
    return LatticeField(BoxDomain(tuple(lo), tuple(hi)), h, vals, S1)
