"""Dirichlet p-energy minimization for S^1-valued phases on 2-D lattices.

Coordinate descent: every free node is moved to the phase minimizing the
energy of the three forward-difference cells it belongs to, found by a
coarse scan of the circle followed by golden-section refinement.  The cell
at ``(i, j)`` couples ``(i, j)`` with ``(i+1, j)`` and ``(i, j+1)``, so nodes
sharing a cell differ by ``(1, 0)``, ``(0, 1)`` or ``(1, -1)``; the classes
of ``(i + 2j) mod 3`` avoid all three and each class is updated at once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .currents import BoxDomain, ZeroCurrent
from .fields import EnergyReport, LatticeField, box_lattice, check_exponent, wrap
from .flatnorm import flat_distance
from .jacobian import plaquette_vorticity

GOLDEN = (math.sqrt(5) - 1) / 2
G2_FLOOR = 1e-12


@dataclass(frozen=True)
class BoundaryDatum:
    """Boundary phase ``degree * arg(x - center)`` (or ``phase``) on a disk or square.

    The lattice has ``grid`` nodes per axis on ``[-1, 1]^2``.  Free nodes are
    those whose four surrounding plaquettes all lie in the domain; every
    other node of the domain is held at the datum.
    """
    degree: int
    grid: int = 128
    shape: str = "disk"
    center: tuple = (0.0, 0.0)
    phase: Optional[Callable] = None

    def __post_init__(self):
        if self.grid < 32:
            raise ValueError("grid must have at least 32 nodes per axis")
        if self.shape not in ("disk", "box"):
            raise ValueError(f"unknown domain shape {self.shape!r}")

    @property
    def h(self) -> float:
        return 2.0 / (self.grid - 1)

    def domain(self) -> BoxDomain:
        return box_lattice((-1.0, -1.0), (1.0, 1.0), self.h)

    def node_mask(self, X, Y):
        if self.shape == "box":
            return np.ones(X.shape, bool)
        return X * X + Y * Y <= 1.0 + 1e-12

    def values(self, X, Y):
        if self.phase is not None:
            return wrap(np.asarray(self.phase(X, Y), float))
        return wrap(self.degree * np.arctan2(Y - self.center[1], X - self.center[0]))


@dataclass(frozen=True)
class SolveOptions:
    p: float
    variant: bool = False
    max_sweeps: int = 3000
    tol: float = 1e-7
    seed: int = 0
    preserve_vorticity: bool = False
    scan: int = 16
    scan_every: int = 8
    golden_steps: int = 24
    coarse_levels: int = 2

    def __post_init__(self):
        check_exponent(self.p)
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")


@dataclass
class Problem:
    theta: np.ndarray
    free: np.ndarray
    active: np.ndarray
    h: float
    domain: BoxDomain


def problem_from_datum(datum: BoundaryDatum, init: Optional[np.ndarray] = None) -> Problem:
    dom = datum.domain()
    h = datum.h
    xs = np.linspace(-1.0, 1.0, datum.grid)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    inside = datum.node_mask(X, Y)
    active = inside[:-1, :-1] & inside[1:, :-1] & inside[:-1, 1:] & inside[1:, 1:]
    free = np.zeros_like(inside)
    free[1:-1, 1:-1] = (active[1:, 1:] & active[:-1, 1:] & active[1:, :-1] & active[:-1, :-1])
    theta = datum.values(X, Y)
    if init is not None:
        theta = np.where(free, wrap(init), theta)
    return Problem(theta, free, active, h, dom)


def problem_from_field(fld: LatticeField) -> Problem:
    """All boundary nodes of the box are fixed; every plaquette is active."""
    if fld.dim != 2:
        raise ValueError("the minimizer works on 2-D fields")
    free = np.zeros(fld.dims, bool)
    free[1:-1, 1:-1] = True
    active = np.ones(tuple(n - 1 for n in fld.dims), bool)
    return Problem(np.array(fld.values, float), free, active, fld.h, fld.domain)


def _cell_energy(g2, p, variant):
    if variant:
        return (1.0 + g2) ** (p / 2)
    return np.maximum(g2, G2_FLOOR) ** (p / 2)


def energy_density_map(theta: np.ndarray, h: float, p: float, active: Optional[np.ndarray] = None,
                       variant: bool = False) -> np.ndarray:
    """Per-cell rescaled density ``(2-p) |grad u|^p h^2`` (unnormalized)."""
    d = theta[1:, :-1] - theta[:-1, :-1]
    e = theta[:-1, 1:] - theta[:-1, :-1]
    g2 = 4.0 * (np.sin(0.5 * d) ** 2 + np.sin(0.5 * e) ** 2) / (h * h)
    dens = (2 - p) * (((1.0 + g2) ** (p / 2)) if variant else g2 ** (p / 2)) * h * h
    if active is not None:
        dens = np.where(active, dens, 0.0)
    return dens


def _total_energy(pb: Problem, p, variant):
    d = pb.theta[1:, :-1] - pb.theta[:-1, :-1]
    e = pb.theta[:-1, 1:] - pb.theta[:-1, :-1]
    g2 = 4.0 * (np.sin(0.5 * d) ** 2 + np.sin(0.5 * e) ** 2) / (pb.h * pb.h)
    # the floor only regularizes the line search; reported energies are exact
    dens = (1.0 + g2) ** (p / 2) if variant else g2 ** (p / 2)
    return float(np.sum(dens[pb.active])) * pb.h * pb.h


def _windings(theta):
    a = theta[:-1, :-1]
    b = theta[1:, :-1]
    c = theta[1:, 1:]
    d = theta[:-1, 1:]
    s = wrap(b - a) + wrap(c - b) + wrap(d - c) + wrap(a - d)
    return np.rint(s / (2 * np.pi)).astype(np.int64)


class _ColorClass:
    def __init__(self, pb: Problem, color: int):
        I, J = np.nonzero(pb.free)
        keep = (I + 2 * J) % 3 == color
        self.i, self.j = I[keep], J[keep]

    def neighbours(self, th):
        i, j = self.i, self.j
        return (th[i + 1, j], th[i, j + 1], th[i - 1, j], th[i, j - 1],
                np.sin(0.5 * (th[i - 1, j + 1] - th[i - 1, j])) ** 2,
                np.sin(0.5 * (th[i + 1, j - 1] - th[i, j - 1])) ** 2)


def _local_energy(t, nb, k, p, variant):
    tE, tN, tW, tS, f1, f2 = nb
    s = lambda x: np.sin(0.5 * x) ** 2
    g0 = k * (s(tE - t) + s(tN - t))
    g1 = k * (f1 + s(t - tW))
    g2 = k * (f2 + s(t - tS))
    return _cell_energy(g0, p, variant) + _cell_energy(g1, p, variant) + _cell_energy(g2, p, variant)


def _line_search(t0, nb, k, opts, full):
    p, var = opts.p, opts.variant
    n = opts.scan
    if full:
        offs = 2 * np.pi * np.arange(n) / n
        grid = t0[:, None] + offs[None, :]
        vals = _local_energy(grid, tuple(x[:, None] for x in nb), k, p, var)
        best = np.argmin(vals, axis=1)
        tb = grid[np.arange(len(t0)), best]
        fbest = vals[np.arange(len(t0)), best]
    else:
        # between scans only the neighbourhood of the current phase is searched
        tb = t0
        fbest = _local_energy(t0, nb, k, p, var)
    a = tb - 2 * np.pi / n
    b = tb + 2 * np.pi / n
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = _local_energy(c, nb, k, p, var)
    fd = _local_energy(d, nb, k, p, var)
    for _ in range(opts.golden_steps):
        left = fc < fd
        # left: [a, d] keeps c as its upper probe; right: [c, b] keeps d as lower
        a, b = np.where(left, a, c), np.where(left, d, b)
        keep, fkeep = np.where(left, c, d), np.where(left, fc, fd)
        new = np.where(left, b - GOLDEN * (b - a), a + GOLDEN * (b - a))
        fnew = _local_energy(new, nb, k, p, var)
        c, fc = np.where(left, new, keep), np.where(left, fnew, fkeep)
        d, fd = np.where(left, keep, new), np.where(left, fkeep, fnew)
    tm = 0.5 * (a + b)
    fm = _local_energy(tm, nb, k, p, var)
    use_scan = fbest < fm
    return np.where(use_scan, tb, tm), np.where(use_scan, fbest, fm)


@dataclass
class MinimizeResult:
    field: LatticeField
    report: EnergyReport
    iterations: int
    converged: bool
    initial_energy: float
    energy: float
    history: list = field(default_factory=list)
    active: Optional[np.ndarray] = None


def descend(pb: Problem, opts: SolveOptions) -> MinimizeResult:
    """Run coordinate descent in place on ``pb.theta``."""
    rng = np.random.default_rng(opts.seed)
    classes = [_ColorClass(pb, c) for c in range(3)]
    k = 4.0 / (pb.h * pb.h)
    th = pb.theta
    w0 = _windings(th) if opts.preserve_vorticity else None
    E0 = _total_energy(pb, opts.p, opts.variant)
    E = E0
    hist = [E0]
    converged = False
    sweeps = 0
    for sweeps in range(1, opts.max_sweeps + 1):
        for c in rng.permutation(3):
            cls = classes[c]
            if not len(cls.i):
                continue
            nb = cls.neighbours(th)
            t0 = th[cls.i, cls.j]
            f0 = _local_energy(t0, nb, k, opts.p, opts.variant)
            full = (sweeps - 1) % opts.scan_every == 0
            t1, f1 = _line_search(t0, nb, k, opts, full)
            acc = f1 < f0
            if not np.any(acc):
                continue
            ii, jj = cls.i[acc], cls.j[acc]
            old = th[ii, jj].copy()
            th[ii, jj] = wrap(t1[acc])
            if opts.preserve_vorticity:
                _revert_winding_changes(th, w0, ii, jj, old)
        E_new = _total_energy(pb, opts.p, opts.variant)
        if E_new > E * (1 + 1e-12) + 1e-300:
            raise RuntimeError(f"energy increased during descent ({E} -> {E_new})")
        hist.append(E_new)
        dec = (E - E_new) / E if E > 0 else 0.0
        E = E_new
        if dec < opts.tol:
            converged = True
            break
    if not converged:
        warnings.warn("sweep budget exhausted before reaching the tolerance")
    if opts.preserve_vorticity and not np.array_equal(_windings(th), w0):
        raise AssertionError("vorticity changed by an accepted update")
    fld = LatticeField(pb.domain, pb.h, th.copy())
    dens = energy_density_map(th, pb.h, opts.p, pb.active, opts.variant) / (2 - opts.p)
    rep = EnergyReport(opts.p, E, (2 - opts.p) * E, dens, opts.variant)
    return MinimizeResult(fld, rep, sweeps, converged, E0, E, hist, pb.active)


def _revert_winding_changes(th, w0, ii, jj, old):
    # a node touches the plaquettes (i-1..i, j-1..j); undo updates around any
    # plaquette whose winding moved, until none moved
    pos = {(a, b): n for n, (a, b) in enumerate(zip(ii.tolist(), jj.tolist()))}
    while True:
        bad = np.argwhere(_windings(th) != w0)
        if not len(bad):
            return
        hit = set()
        for a, b in bad.tolist():
            for da in (0, 1):
                for db in (0, 1):
                    n = pos.get((a + da, b + db))
                    if n is not None:
                        hit.add(n)
        if not hit:
            raise AssertionError("vorticity changed outside the updated nodes")
        idx = np.fromiter(sorted(hit), int)
        th[ii[idx], jj[idx]] = old[idx]
        for n in idx.tolist():
            pos.pop((int(ii[n]), int(jj[n])))


def initial_phase(datum: BoundaryDatum) -> np.ndarray:
    """Product-vortex start ``degree * arg(x - c)``, ``c`` slightly off center.

    The offset keeps a degree >= 2 start away from exact pi jumps.
    """
    xs = np.linspace(-1.0, 1.0, datum.grid)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    c = np.asarray(datum.center) + datum.h * np.array([0.3, 0.42])
    return wrap(datum.degree * np.arctan2(Y - c[1], X - c[0]))


def prolong(theta: np.ndarray, grid: int) -> np.ndarray:
    """Phase on a finer ``grid`` over ``[-1, 1]^2`` by bilinear interpolation of ``e^{i theta}``."""
    from scipy.interpolate import RegularGridInterpolator
    xs = np.linspace(-1.0, 1.0, theta.shape[0])
    fine = np.linspace(-1.0, 1.0, grid)
    X, Y = np.meshgrid(fine, fine, indexing="ij")
    z = RegularGridInterpolator((xs, xs), np.exp(1j * theta))(np.stack([X, Y], -1))
    return np.angle(z)


def minimize(datum: BoundaryDatum, opts: SolveOptions, init: Optional[np.ndarray] = None) -> MinimizeResult:
    """Local minimizer of the Dirichlet problem for ``datum``.

    Without ``init`` the product-vortex start is first relaxed on up to
    ``coarse_levels`` coarser grids (halving the node count, never below 32)
    and interpolated upward.
    """
    if not 1.2 <= opts.p <= 1.9:
        raise ValueError("minimize supports p in [1.2, 1.9]")
    if init is None:
        grids = [datum.grid]
        while len(grids) <= opts.coarse_levels and (grids[-1] + 1) // 2 >= 32:
            grids.append((grids[-1] + 1) // 2)
        start = initial_phase(replace(datum, grid=grids[-1]))
        for g in reversed(grids[1:]):
            res = descend(problem_from_datum(replace(datum, grid=g), start), opts)
            start = prolong(res.field.values, grids[grids.index(g) - 1])
        init = start
    return descend(problem_from_datum(datum, init), opts)


def relax(fld: LatticeField, opts: SolveOptions) -> MinimizeResult:
    """Descent from ``fld`` with its box boundary held fixed."""
    return descend(problem_from_field(fld), opts)


def vortices(fld: LatticeField, active: Optional[np.ndarray] = None) -> ZeroCurrent:
    T = plaquette_vorticity(fld)
    if active is None:
        return T
    lo = np.asarray(fld.origin)
    keep = []
    for x, m in T:
        i, j = np.floor((np.asarray(x) - lo) / fld.h).astype(int)
        if active[i, j]:
            keep.append((x, m))
    return ZeroCurrent(keep, dim=2)


def concentration_ratio(fld: LatticeField, density: np.ndarray, vort: ZeroCurrent, radius: float = 0.25) -> float:
    """Fraction of the energy in cells within ``radius`` of a detected vortex."""
    total = float(np.sum(density))
    if total == 0 or not vort:
        return 0.0
    cx, cy = fld.cell_centers()
    near = np.zeros(cx.shape, bool)
    for x, _ in vort:
        near |= np.hypot(cx - x[0], cy - x[1]) < radius
    return float(np.sum(density[near])) / total


@dataclass
class SweepRecord:
    p: float
    rescaled_energy: float
    vortices: list
    total_vorticity: int
    concentration: float
    flat_to_previous: Optional[float]
    iterations: int
    converged: bool

    def to_json(self) -> dict:
        return {
            "p": self.p, "rescaled_energy": self.rescaled_energy,
            "vortices": [{"x": list(x), "m": m} for x, m in self.vortices],
            "total_vorticity": self.total_vorticity, "concentration": self.concentration,
            "flat_to_previous": self.flat_to_previous, "iterations": self.iterations,
            "converged": self.converged,
        }


def vortex_sweep(datum: BoundaryDatum, p_schedule: Sequence[float], opts: SolveOptions,
                 warm: bool = True) -> list[SweepRecord]:
    """Minimize along ``p_schedule``, warm-starting each run from the previous one."""
    out = []
    prev_field = None
    prev_T = None
    for p in p_schedule:
        o = SolveOptions(**{**opts.__dict__, "p": p})
        res = minimize(datum, o, init=prev_field.values if (warm and prev_field is not None) else None)
        T = vortices(res.field, res.active)
        conc = concentration_ratio(res.field, res.report.density, T)
        fd = flat_distance(T, prev_T, datum.domain()) if prev_T is not None else None
        out.append(SweepRecord(p, res.report.rescaled, list(T), T.total(), conc, fd,
                               res.iterations, res.converged))
        prev_field, prev_T = res.field, T
    return out
