"""Greedy splitting of an integral 0-current into ``X + boundary(S)``.

Opposite charges (or a charge and the domain boundary) closer than
``alpha_1 = alpha^{1/(n-p)}`` are repeatedly joined by a segment, nearest
pair first.  What survives is ``X``.  The distances of the joined pairs are
binned on the scales ``alpha_k = alpha^{k/(n-p)}``; the mass and filling
estimates are then checked against an energy supplied by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .currents import BoxDomain, Constants, OneCurrent, PairChoice, ZeroCurrent, mass_one, mass_zero, pair_min
from .fields import LatticeField, S1
from .jacobian import wrapped_diff

MIN_GAP = 1e-6


@dataclass(frozen=True)
class DecompParams:
    n: int
    p: float
    alpha: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not self.n - 1 < self.p < self.n:
            raise ValueError(f"p={self.p} outside (n-1, n)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.gap < MIN_GAP:
            raise ValueError(f"n-p={self.gap} below {MIN_GAP}")

    @property
    def gap(self) -> float:
        return self.n - self.p

    def log_alpha_k(self, k) -> float:
        return k * math.log(self.alpha) / self.gap

    def alpha_k(self, k) -> float:
        return math.exp(self.log_alpha_k(k))

    @property
    def alpha_1(self) -> float:
        a1 = self.alpha_k(1)
        if a1 == 0.0:
            raise ValueError("scale underflow: alpha^{1/(n-p)} is below the float range")
        return a1

    @property
    def admissible(self) -> bool:
        return check_admissible(self.n, self.p, self.alpha)[0]


def check_admissible(n: int, p: float, alpha: float) -> tuple[bool, float, float]:
    """Hypotheses of the decomposition estimates; returns (ok, lhs, rhs)."""
    gap = n - p
    rhs = (1 - alpha) * (2 * alpha ** 2 - 1) / (4 * alpha)
    # alpha^{-1/gap} overflows for tiny gaps; the ratio tends to alpha^{-2}
    e = -math.log(alpha) / gap
    if e > 700:
        ratio = 1.0 / alpha ** 2
    else:
        a = math.exp(e)
        ratio = a / (a * alpha ** 2 - 1)
    lhs = p * gap / (n - 1) * ratio
    ok = alpha > math.sqrt(3) / 2 and gap <= 0.25 and lhs <= rhs
    return ok, lhs, rhs


@dataclass
class ScaleLedger:
    """Per-scale counts of joined pairs.

    ``e[k]`` counts pairs on scale ``k`` whose positive end lies in the
    domain, ``e_prime[k]`` those whose negative end does; index 0 holds the
    positive and negative mass of the remainder ``X``.
    """

    params: DecompParams
    e: list[int]
    e_prime: list[int]
    scales: list[int] = field(default_factory=list)

    @property
    def K(self) -> int:
        return max((k for k, v in enumerate(self.e) if v > 0), default=0)

    @property
    def K_prime(self) -> int:
        return max((k for k, v in enumerate(self.e_prime) if v > 0), default=0)

    @property
    def partial_sums(self) -> list[int]:
        return list(np.cumsum(self.e[: self.K + 1]).tolist())

    @property
    def partial_sums_prime(self) -> list[int]:
        return list(np.cumsum(self.e_prime[: self.K_prime + 1]).tolist())

    def rows(self) -> list[tuple[int, float, int, int]]:
        top = max(len(self.e), len(self.e_prime))
        return [(k, self.params.alpha_k(k), self.e[k] if k < len(self.e) else 0,
                 self.e_prime[k] if k < len(self.e_prime) else 0) for k in range(top)]

    def to_json(self) -> dict:
        return {"K": self.K, "K_prime": self.K_prime, "e": self.e, "e_prime": self.e_prime,
                "alpha_k": [self.params.alpha_k(k) for k in range(max(len(self.e), len(self.e_prime)))]}


def scale_index(d: float, params: DecompParams) -> int:
    """The ``k`` with ``alpha_{k+1} < d <= alpha_k``."""
    if d <= 0:
        raise ValueError("pair distance must be positive")
    la = math.log(params.alpha) / params.gap
    k = int(math.floor(math.log(d) / la))
    while params.alpha_k(k) < d:
        k -= 1
    while params.alpha_k(k + 1) >= d:
        k += 1
    return k


@dataclass
class DecompositionResult:
    X: ZeroCurrent
    S: OneCurrent
    ledger: ScaleLedger
    pairs: list[PairChoice]

    @property
    def segment_list(self) -> list[tuple]:
        """Segments in the order they were created (``S`` itself is merged)."""
        return [pc.segment() for pc in self.pairs]

    def to_json(self) -> dict:
        from .io import current_to_json
        return {
            "X": current_to_json(self.X),
            "S": current_to_json(self.S),
            "ledger": self.ledger.to_json(),
            "pairs": [{"y": list(pc.y), "z": list(pc.z), "distance": pc.distance,
                       "y_on_boundary": pc.y_on_boundary, "z_on_boundary": pc.z_on_boundary}
                      for pc in self.pairs],
        }


def decompose(T: ZeroCurrent, domain: BoxDomain, params: DecompParams) -> DecompositionResult:
    a1 = params.alpha_1
    X = T.restrict(domain)
    pairs: list[PairChoice] = []
    start_mass = mass_zero(X)
    while X:
        pc = pair_min(X, domain)
        if pc.distance > a1:
            break
        pairs.append(pc)
        delta = []
        if not pc.y_on_boundary:
            delta.append((pc.y, -1))
        if not pc.z_on_boundary:
            delta.append((pc.z, 1))
        X = X + ZeroCurrent(delta, dim=domain.dim)
        if len(pairs) > start_mass:
            raise AssertionError("decomposition failed to terminate")

    top = 1 + max((scale_index(pc.distance, params) for pc in pairs), default=0)
    e = [0] * (top + 1)
    e_prime = [0] * (top + 1)
    scales = []
    for pc in pairs:
        k = scale_index(pc.distance, params)
        scales.append(k)
        if not pc.y_on_boundary:
            e[k] += 1
        if not pc.z_on_boundary:
            e_prime[k] += 1
    e[0] = X.positive_mass()
    e_prime[0] = X.negative_mass()
    S = OneCurrent((pc.segment() for pc in pairs), dim=domain.dim)
    return DecompositionResult(X, S, ScaleLedger(params, e, e_prime, scales), pairs)


def bound_constants(params: DecompParams) -> tuple[float, float]:
    """``C(n, alpha)`` evaluated at ``p``, and the constant of the sharp bound."""
    n, p, a = params.n, params.p, params.alpha
    om = Constants(n).omega
    C = 8 * a / ((1 - a) ** 2 * (2 * a * a - 1)) / ((n - 1) ** (p / 2) * om)
    C_sharp = C * n * (n - 1) ** (p / 2 - 1) * om
    return C, C_sharp


@dataclass
class BoundsReport:
    C: float
    C_sharp: float
    mass_lhs: float
    mass_rhs: float
    flat_lhs: float
    flat_rhs: float
    sharp_lhs: float
    sharp_rhs: float

    @property
    def mass_ok(self) -> bool:
        return self.mass_lhs <= self.mass_rhs

    @property
    def flat_ok(self) -> bool:
        return self.flat_lhs <= self.flat_rhs

    @property
    def sharp_ok(self) -> bool:
        return self.sharp_lhs <= self.sharp_rhs

    @property
    def all_ok(self) -> bool:
        return self.mass_ok and self.flat_ok and self.sharp_ok

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        out.update(mass_ok=self.mass_ok, flat_ok=self.flat_ok, sharp_ok=self.sharp_ok)
        return out


def verify_bounds(result: DecompositionResult, input_mass: float, rescaled_energy: float,
                  params: DecompParams) -> BoundsReport:
    """Evaluate both sides of the mass, filling and sharp mass estimates.

    ``rescaled_energy`` is ``(n-p) * int |grad u|^p`` of a map whose Jacobian
    is the decomposed current.
    """
    ok, lhs, rhs = check_admissible(params.n, params.p, params.alpha)
    if not ok:
        raise ValueError(f"parameters not admissible ({lhs:.4g} > {rhs:.4g} or range violated)")
    n, p, a, gap = params.n, params.p, params.alpha, params.gap
    C, C_sharp = bound_constants(params)
    E = rescaled_energy
    mX = mass_zero(result.X)
    mS = mass_one(result.S)
    flat_factor = a * math.exp(math.log(a) / (2 * gap))
    om = Constants(n).omega
    sharp_lhs = (n - 1) ** (p / 2) * om * (a * mX - p * (2 ** gap - 1) / (n - 1))
    log_term = 1 + 2 * math.log(max(input_mass, 1.0)) / abs(math.log(gap))
    sharp_rhs = (1 + C_sharp * (2 ** gap - 1) / math.sqrt(gap) * log_term) * E
    return BoundsReport(C, C_sharp, mX, C * E, mS, C * flat_factor * E, sharp_lhs, sharp_rhs)


def lemma_ai_check(a: Sequence[int], beta: float, lam: float) -> tuple[float, float]:
    """Both sides of the weighted partial-sum inequality."""
    if not 1 < beta < 2:
        raise ValueError("beta must lie in (1, 2)")
    if not 0.75 < lam < 1:
        raise ValueError("lambda must lie in (3/4, 1)")
    a = [int(x) for x in a]
    if any(x < 0 for x in a):
        raise ValueError("entries must be nonnegative")
    S = np.cumsum(a, dtype=float)
    nxt = np.append(np.asarray(a[1:], float), 0.0)
    w = lam ** np.arange(len(a))
    lhs = 0.0
    for k in range(len(a)):
        if S[k] > 0:
            lhs += max(S[k] - nxt[k], 0.0) ** beta / S[k] ** (beta - 1) * w[k]
    rhs = (2 * lam - 1) / (2 * lam) * float(np.dot(a, w))
    return lhs, rhs


def _node_gradients(fld: LatticeField) -> np.ndarray:
    """Central-difference Jacobian of ``u`` at interior nodes, shape (nx, ny, 2, 2)."""
    u = fld.vectors()
    g = np.full(u.shape[:2] + (2, 2), np.nan)
    g[1:-1, :, :, 0] = (u[2:] - u[:-2]) / (2 * fld.h)
    g[:, 1:-1, :, 1] = (u[:, 2:] - u[:, :-2]) / (2 * fld.h)
    return g


def _bilinear(arr: np.ndarray, fld: LatticeField, pts: np.ndarray) -> np.ndarray:
    lo = np.array(fld.domain.lo)
    s = (pts - lo) / fld.h
    i0 = np.floor(s).astype(int)
    t = s - i0
    i, j = i0[:, 0], i0[:, 1]
    tx, ty = t[:, 0], t[:, 1]
    shape = (-1,) + (1,) * (arr.ndim - 2)
    tx, ty = tx.reshape(shape), ty.reshape(shape)
    return ((1 - tx) * (1 - ty) * arr[i, j] + tx * (1 - ty) * arr[i + 1, j]
            + (1 - tx) * ty * arr[i, j + 1] + tx * ty * arr[i + 1, j + 1])


def enclosed_winding(fld: LatticeField, center: Sequence[float], radius: float) -> int:
    """Sum of plaquette windings over plaquettes whose centers lie in the disk.

    Evaluated as the degree along the staircase boundary of that plaquette
    set, which equals the sum exactly and needs only the boundary edges to be
    resolved.
    """
    X, Y = fld.cell_centers()
    m = (np.hypot(X - center[0], Y - center[1]) < radius).astype(np.int64)
    th = fld.values
    pad = np.pad(m, 1)
    total = 0.0
    # horizontal edges (i,j)->(i+1,j): bottom of plaquette (i,j), top of (i,j-1)
    ch = pad[1:-1, 1:] - pad[1:-1, :-1]
    ii, jj = np.nonzero(ch)
    total += float(np.sum(ch[ii, jj] * wrapped_diff(th[ii, jj], th[ii + 1, jj])))
    # vertical edges (i,j)->(i,j+1): right side of plaquette (i-1,j), left of (i,j)
    cv = pad[:-1, 1:-1] - pad[1:, 1:-1]
    ii, jj = np.nonzero(cv)
    total += float(np.sum(cv[ii, jj] * wrapped_diff(th[ii, jj], th[ii, jj + 1])))
    return int(np.rint(total / (2 * np.pi)))


def boundary_energy_lower_bound(fld: LatticeField, center: Sequence[float], radius: float, p: float,
                                samples: Optional[int] = None) -> tuple[float, float]:
    """Energy on a circle against the bound from the enclosed Jacobian (n = 2).

    The line integral uses the trapezoidal rule on the circle with a
    bilinear interpolation of the central-difference gradient.
    """
    if fld.target != S1 or fld.dim != 2:
        raise ValueError("needs a 2-D S^1 field")
    h = fld.h
    c = np.asarray(center, float)
    X, Y = fld.cell_centers()
    band = np.abs(np.hypot(X - c[0], Y - c[1]) - radius) < 2 * h + h / np.sqrt(2)
    ii, jj = np.nonzero(band)
    th = fld.values
    try:
        ring = (wrapped_diff(th[ii, jj], th[ii + 1, jj]) + wrapped_diff(th[ii + 1, jj], th[ii + 1, jj + 1])
                + wrapped_diff(th[ii + 1, jj + 1], th[ii, jj + 1]) + wrapped_diff(th[ii, jj + 1], th[ii, jj]))
    except ValueError as exc:
        raise ValueError("circle passes too close to a vortex") from exc
    if np.any(np.rint(ring / (2 * np.pi)) != 0):
        raise ValueError("circle passes too close to a vortex")
    n_s = samples or max(512, int(8 * np.ceil(2 * np.pi * radius / h)))
    phi = 2 * np.pi * np.arange(n_s) / n_s
    pts = c + radius * np.stack([np.cos(phi), np.sin(phi)], -1)
    if not np.all(fld.domain.contains(pts)):
        raise ValueError("circle leaves the domain")
    g = _bilinear(_node_gradients(fld), fld, pts)
    if np.any(np.isnan(g)):
        raise ValueError("circle touches the outer node layer")
    gn = np.sqrt(np.einsum("kij,kij->k", g, g))
    L = 2 * np.pi * radius
    lhs = float(np.mean(gn ** p) * L)
    deg = enclosed_winding(fld, c, radius)
    jac = Constants(2).gamma * abs(deg)
    rhs = 2 ** p * jac ** p / L ** (p - 1)
    return lhs, rhs
