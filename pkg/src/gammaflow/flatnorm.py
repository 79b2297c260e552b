"""Exact flat norm of integral 0-currents in a box.

Each unit of positive mass is sent either to a unit of negative mass or to
the boundary, and vice versa.  This is a balanced assignment once every
positive atom gets a private "boundary" column and every negative atom a
private "boundary" row.  We fold the negative-to-boundary costs into the
matrix so only an ``n_pos x (n_neg + n_pos)`` rectangular problem remains:

    cost'(p, n) = |p - n| - d(n),   cost'(p, bd_p) = d(p),

and the optimum is ``min sum cost' + sum_n d(n)``.  A negative atom whose
column is left unused is routed to the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import min_weight_full_bipartite_matching

from .currents import BoxDomain, OneCurrent, ZeroCurrent

MAX_UNITS = 10_000
DENSE_LIMIT = 1_500


@dataclass(frozen=True)
class FlatNormResult:
    value: float
    witness: OneCurrent

    def __iter__(self):
        return iter((self.value, self.witness))


def _expand(T: ZeroCurrent) -> tuple[np.ndarray, np.ndarray]:
    pts, mult = T.points, T.multiplicities
    pos = np.repeat(pts[mult > 0], mult[mult > 0], axis=0)
    neg = np.repeat(pts[mult < 0], -mult[mult < 0], axis=0)
    return pos, neg


def _assign_dense(cost: np.ndarray) -> np.ndarray:
    rows, cols = linear_sum_assignment(cost)
    out = np.empty(cost.shape[0], dtype=np.int64)
    out[rows] = cols
    return out


def _assign_sparse(pos, neg, dpos, dneg) -> np.ndarray:
    """Same problem with edges that can never be optimal pruned.

    A pair (p, n) with |p - n| > d(p) + d(n) is beaten by sending both to
    the boundary, so it is dropped.
    """
    P, N = len(pos), len(neg)
    rows, cols, vals = [np.arange(P)], [N + np.arange(P)], [dpos]
    block = 512
    for s in range(0, P, block):
        diff = pos[s:s + block, None, :] - neg[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        keep = dist <= dpos[s:s + block, None] + dneg[None, :]
        i, j = np.nonzero(keep)
        rows.append(i + s)
        cols.append(j)
        vals.append(dist[i, j] - dneg[j])
    r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    # the matcher treats explicit zeros as missing edges, so shift to positive
    v = v - v.min() + 1.0
    graph = coo_matrix((v, (r, c)), shape=(P, N + P)).tocsr()
    rows_m, cols_m = min_weight_full_bipartite_matching(graph)
    out = np.empty(P, dtype=np.int64)
    out[rows_m] = cols_m
    return out


def flat_norm_zero(T: ZeroCurrent, domain: BoxDomain, convex: bool = True) -> FlatNormResult:
    """Flat norm of ``T`` in ``domain`` together with an optimal filling.

    Atoms on or outside the boundary are ignored.  The returned witness ``S``
    satisfies ``boundary_one(S, domain) == T`` and ``mass_one(S) == value``.
    """
    if not convex or not isinstance(domain, BoxDomain):
        raise ValueError("only convex box domains are supported")
    T = T.restrict(domain)
    if not T:
        return FlatNormResult(0.0, OneCurrent(dim=domain.dim))
    units = T.positive_mass() + T.negative_mass()
    if units > MAX_UNITS:
        raise ValueError(f"flat norm instance too large: {units} units > {MAX_UNITS}")

    pos, neg = _expand(T)
    dpos = np.asarray(domain.boundary_distance(pos)).reshape(-1)
    dneg = np.asarray(domain.boundary_distance(neg)).reshape(-1)
    P, N = len(pos), len(neg)

    if P == 0:
        match = np.zeros(0, dtype=np.int64)
    elif P + N <= DENSE_LIMIT:
        cost = np.full((P, N + P), np.inf)
        if N:
            dist = np.linalg.norm(pos[:, None, :] - neg[None, :, :], axis=-1)
            cost[:, :N] = dist - dneg[None, :]
        cost[np.arange(P), N + np.arange(P)] = dpos
        match = _assign_dense(cost)
    else:
        match = _assign_sparse(pos, neg, dpos, dneg)

    segments = []
    value = 0.0
    used = np.zeros(N, dtype=bool)
    for i, j in enumerate(match):
        p = pos[i]
        if j < N:
            used[j] = True
            n = neg[j]
            value += float(np.linalg.norm(p - n))
            segments.append((tuple(n), tuple(p), 1))
        else:
            value += float(dpos[i])
            if dpos[i] > 0:
                segments.append((domain.boundary_foot(p), tuple(p), 1))
    for j in np.nonzero(~used)[0]:
        n = neg[j]
        value += float(dneg[j])
        segments.append((tuple(n), domain.boundary_foot(n), 1))
    return FlatNormResult(value, OneCurrent(segments, dim=domain.dim))


def flat_distance(T1: ZeroCurrent, T2: ZeroCurrent, domain: BoxDomain) -> float:
    return flat_norm_zero(T1 - T2, domain).value
