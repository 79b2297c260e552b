"""Distributional Jacobians of S^1 lattice fields as integer currents.

Windings are sums of wrapped phase differences around lattice squares.  An
edge jump within ``JUMP_TOL`` of pi makes the winding ambiguous and is
reported as an error instead of being silently rounded.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .currents import OneCurrent, ZeroCurrent
from .fields import LatticeField, S1, lp_norm, phase_cell_sq_grad, vector_cell_sq_grad
from .flatnorm import flat_distance

JUMP_TOL = 1e-9
SOURCE_TAG = "plaquette_winding"


class UnderResolvedField(ValueError):
    pass


def wrapped_diff(a, b):
    """``b - a`` wrapped to (-pi, pi], raising if too close to +-pi."""
    d = np.mod(np.asarray(b) - np.asarray(a) + np.pi, 2 * np.pi) - np.pi
    d = np.where(d == -np.pi, np.pi, d)
    if np.any(np.abs(d) > np.pi - JUMP_TOL):
        raise UnderResolvedField("under-resolved field: a lattice edge carries a phase jump of pi")
    return d


def plaquette_winding(theta: np.ndarray) -> np.ndarray:
    """Integer winding of every lattice square of a 2-D phase array.

    Corners are visited counter-clockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1).
    """
    dx0 = wrapped_diff(theta[:-1, :-1], theta[1:, :-1])
    dy1 = wrapped_diff(theta[1:, :-1], theta[1:, 1:])
    dx1 = wrapped_diff(theta[1:, 1:], theta[:-1, 1:])
    dy0 = wrapped_diff(theta[:-1, 1:], theta[:-1, :-1])
    return np.rint((dx0 + dy1 + dx1 + dy0) / (2 * np.pi)).astype(np.int64)


def _require_s1(fld: LatticeField, dim: int) -> None:
    if fld.target != S1:
        raise ValueError("vorticity needs an S^1 field")
    if fld.dim != dim:
        raise ValueError(f"expected a {dim}-D field, got {fld.dim}-D")


def plaquette_vorticity(fld: LatticeField) -> ZeroCurrent:
    """Jacobian divided by pi: one atom per winding plaquette, at its center."""
    _require_s1(fld, 2)
    w = plaquette_winding(fld.values)
    idx = np.argwhere(w != 0)
    lo = np.array(fld.domain.lo)
    pts = lo + 0.5 * fld.h * (2 * idx + 1)
    return ZeroCurrent(zip(map(tuple, pts), w[tuple(idx.T)].tolist()), dim=2)


def face_windings_3d(theta: np.ndarray) -> list[np.ndarray]:
    """Windings of the faces normal to each axis.

    For normal ``nu`` the ring lies in the axes ``(nu+1, nu+2) mod 3`` and is
    traversed counter-clockwise when seen from ``+e_nu``.
    """
    out = []
    for nu in range(3):
        a, b = (nu + 1) % 3, (nu + 2) % 3
        # bring the ring axes to the front, keep nu last
        t = np.moveaxis(theta, (a, b, nu), (0, 1, 2))
        w = plaquette_winding(t)  # broadcasts over the trailing nu axis
        out.append(np.moveaxis(w, (0, 1, 2), (a, b, nu)))
    return out


def face_vorticity_3d(fld: LatticeField) -> OneCurrent:
    """Dual edges crossing every winding face, oriented along ``+normal``."""
    _require_s1(fld, 3)
    lo = np.array(fld.domain.lo)
    half = 0.5 * fld.h
    segs = []
    for nu, w in enumerate(face_windings_3d(fld.values)):
        idx = np.argwhere(w != 0)
        mult = w[tuple(idx.T)]
        # doubled integer coordinates keep shared endpoints bitwise identical
        center2 = 2 * idx + 1
        center2[:, nu] = 2 * idx[:, nu]
        for c2, m in zip(center2, mult.tolist()):
            a2, b2 = c2.copy(), c2.copy()
            a2[nu] -= 1
            b2[nu] += 1
            segs.append((tuple(lo + half * a2), tuple(lo + half * b2), m))
    return OneCurrent(segs, dim=3)


def degree_loop(fld: LatticeField, loop: Sequence[Sequence[int]]) -> int:
    """Degree of the field along a closed cycle of adjacent lattice nodes."""
    if fld.target != S1:
        raise ValueError("degree needs an S^1 field")
    idx = np.asarray(loop, dtype=int)
    steps = np.abs(np.diff(np.vstack([idx, idx[:1]]), axis=0)).sum(axis=1)
    if np.any(steps != 1):
        raise ValueError("consecutive loop nodes must be lattice neighbours")
    th = fld.values[tuple(idx.T)]
    d = wrapped_diff(th, np.roll(th, -1))
    return int(np.rint(d.sum() / (2 * np.pi)))


def boundary_cycle(dims: Sequence[int]) -> list[tuple[int, int]]:
    """Counter-clockwise node cycle around the boundary of a 2-D lattice."""
    nx, ny = dims
    cyc = [(i, 0) for i in range(nx - 1)]
    cyc += [(nx - 1, j) for j in range(ny - 1)]
    cyc += [(i, ny - 1) for i in range(nx - 1, 0, -1)]
    cyc += [(0, j) for j in range(ny - 1, 0, -1)]
    return cyc


def jform_ratio_cells(fld: LatticeField) -> np.ndarray:
    """Per-cell ``|ju| / |grad u|`` with forward differences, 0 where grad u = 0.

    The discrete ``ju`` along an edge is ``sin(dtheta)/h``, the gradient is
    the chord ``2 sin(|dtheta|/2)/h``.
    """
    if fld.target != S1:
        raise ValueError("j-form check needs an S^1 field")
    th = fld.values
    d = th.ndim
    base = th[tuple(slice(0, -1) for _ in range(d))]
    j2 = np.zeros(base.shape)
    for i in range(d):
        sl = tuple(slice(1, None) if k == i else slice(0, -1) for k in range(d))
        j2 += np.sin(th[sl] - base) ** 2
    j2 /= fld.h ** 2
    g2 = phase_cell_sq_grad(th, fld.h)
    ratio = np.zeros_like(g2)
    nz = g2 > 0
    ratio[nz] = np.sqrt(j2[nz] / g2[nz])
    return ratio


def jform_bound_check(fld: LatticeField, p: float = 1.5) -> float:
    r = jform_ratio_cells(fld)
    return float(r.max()) if r.size else 0.0


def _vorticity(fld: LatticeField) -> ZeroCurrent:
    if fld.target != S1:
        raise ValueError("continuity ratio needs S^1 fields")
    return plaquette_vorticity(fld)


def continuity_ratio(u: LatticeField, v: LatticeField, p: float) -> float:
    """Flat distance of the Jacobians over ``||u-v||_q (||Du||_p + ||Dv||_p)``.

    ``q`` is the conjugate exponent ``p/(p-1)`` (target dimension 2).
    """
    if u.dims != v.dims or u.h != v.h or u.domain != v.domain:
        raise ValueError("fields must share a lattice")
    q = p / (p - 1.0)
    diff = u.vectors() - v.vectors()
    nq = lp_norm(diff, u.h, q, u.dim)

    def grad_p(f):
        g2 = phase_cell_sq_grad(f.values, f.h) if f.target == S1 else vector_cell_sq_grad(f.values, f.h)
        return float((np.sum(g2 ** (p / 2)) * f.h ** f.dim) ** (1 / p))

    denom = nq * (grad_p(u) + grad_p(v))
    if denom < 1e-14:
        raise ValueError("identical fields: the continuity ratio is undefined")
    return flat_distance(_vorticity(u), _vorticity(v), u.domain) / denom
