"""Acceptance checks, one per criterion.

Each test prints a single ``PASS criterion N: ...`` or ``FAIL criterion N: ...``
line (visible with ``pytest -s``) and then asserts the same condition.
Tolerances and runtime budgets are fixed here and not tuned per run.
"""

import json
import math
import time
import warnings

import numpy as np
import pytest

from gammaflow.cli import load_fixture, run
from gammaflow.currents import BoxDomain, ZeroCurrent, boundary_one, mass_zero
from gammaflow.decomposition import DecompParams, boundary_energy_lower_bound, decompose, lemma_ai_check, verify_bounds
from gammaflow.fields import LatticeField, axis_vortex_3d, box_lattice, p_energy, product_vortex
from gammaflow.flatnorm import flat_norm_zero
from gammaflow.grids import GridSpec, acceptance_frequency, deform_to_dual, dual_edge_multiplicities, \
    intersection_numbers, select_shift
from gammaflow.io import current_from_json
from gammaflow.jacobian import continuity_ratio, face_vorticity_3d
from gammaflow.minimizer import (BoundaryDatum, SolveOptions, energy_density_map, initial_phase, minimize,
                                 problem_from_datum, vortex_sweep, vortices)
from gammaflow.recovery import RecoveryPlan, limsup_sweep_2d
from gammaflow.vortex_energy import product_vortex_energy

from oracles import brute_flat_norm

UNIT = BoxDomain((0.0, 0.0), (1.0, 1.0))


def verdict(n, ok, msg, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {msg} [{elapsed:.1f} s / {budget:.0f} s]")
    return ok


def test_criterion_01_annulus_energy():
    t0 = time.perf_counter()
    h = 1 / 256
    c = (0.3 * h, 0.42 * h)
    f = product_vortex([(c, 1)], box_lattice((-1, -1), (1, 1), h), h)
    errs = {}
    for p in (1.5, 1.9):
        ring = lambda x, y: (np.hypot(x - c[0], y - c[1]) < 1) & (np.hypot(x - c[0], y - c[1]) >= 4 * h)
        ref = 2 * math.pi * (1 - (4 * h) ** (2 - p)) / (2 - p)
        errs[p] = abs(p_energy(f, p, region=ring).total / ref - 1)
    ok = max(errs.values()) <= 0.01
    msg = ", ".join(f"p={p}: rel err {e:.2e}" for p, e in errs.items())
    assert verdict(1, ok, msg + " (tol 1e-2)", time.perf_counter() - t0, 10)


def test_criterion_02_limsup_constant():
    t0 = time.perf_counter()
    fx = load_fixture("three_atoms")
    T = current_from_json(fx["current"])
    rows = limsup_sweep_2d(T, BoxDomain.from_json(fx["domain"]), RecoveryPlan([1.2, 1.4, 1.6]))
    ratios = [r.ratio for r in rows]
    gaps = [abs(r - 1) for r in ratios]
    in_band = all(0.75 <= r <= 1.05 for r in ratios)
    # rows run in increasing p, so the gap may only grow along them
    monotone = all(gaps[k] <= gaps[k + 1] for k in range(len(gaps) - 1))
    msg = ", ".join(f"p={r.p}: ratio {r.ratio:.4f} (raw {r.extra['raw_ratio']:.3f})" for r in rows)
    assert verdict(2, in_band and monotone, msg + f"; band [0.75,1.05], gaps non-increasing as p decreases: {monotone}",
                   time.perf_counter() - t0, 300)


def _micro_dipole_cloud(rng, n_pairs, spacing, singles=0):
    atoms = []
    centers = []
    while len(centers) < n_pairs + singles:
        c = rng.uniform(0.08, 0.92, 2)
        if all(np.linalg.norm(c - q) > 0.05 for q in centers):
            centers.append(c)
    for k, c in enumerate(centers):
        if k < n_pairs:
            phi = rng.uniform(0, 2 * np.pi)
            d = spacing * rng.uniform(0.2, 1.0) * np.array([np.cos(phi), np.sin(phi)])
            s = rng.choice([-1, 1])
            atoms += [(tuple(c), int(s)), (tuple(c + d), int(-s))]
        else:
            atoms.append((tuple(c), int(rng.choice([-1, 1]))))
    return ZeroCurrent(atoms)


def _structural(T, res, params):
    exact = res.X + boundary_one(res.S, UNIT) == T
    longest = max((pc.distance for pc in res.pairs), default=0.0)
    guard = len(res.pairs) <= mass_zero(T)
    return exact, longest <= params.alpha_1, guard


def test_criterion_03_decomposition():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    failures = []
    n_admissible = n_stress = 0
    for k in range(200):
        if k % 2 == 0:
            params = DecompParams(2, 2 - (3e-3 if k % 4 == 0 else 2e-3), 0.95)
            n_pairs = int(rng.integers(0, 16))
            T = _micro_dipole_cloud(rng, n_pairs, params.alpha_1, singles=int(rng.integers(0, 16)))
            res = decompose(T, UNIT, params)
            checks = list(_structural(T, res, params))
            E = (2 - params.p) * product_vortex_energy(T.points, T.multiplicities, UNIT, params.p) if T else 0.0
            rep = verify_bounds(res, mass_zero(T), E, params)
            checks += [rep.mass_ok, rep.flat_ok, rep.sharp_ok]
            n_admissible += 1
        else:
            params = DecompParams(2, 1.9, 0.9)
            n_atoms = int(rng.integers(1, 51))
            pts = rng.uniform(0.02, 0.98, (n_atoms, 2))
            T = ZeroCurrent(zip(map(tuple, pts), rng.choice([-1, 1], n_atoms).tolist()))
            res = decompose(T, UNIT, params)
            checks = list(_structural(T, res, params))
            n_stress += 1
        if not all(checks):
            failures.append((k, checks))
    msg = (f"{n_admissible} admissible + {n_stress} stress instances, "
           f"{len(failures)} with a violated invariant or bound")
    assert verdict(3, not failures, msg, time.perf_counter() - t0, 120), failures[:5]


def test_criterion_04_flat_norm_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    D = BoxDomain((0.0, 0.0), (1.0, 1.0))
    worst = 0.0
    witness_ok = True
    for _ in range(500):
        n = int(rng.integers(1, 7))
        pts = rng.uniform(0.01, 0.99, (n, 2))
        T = ZeroCurrent(zip(map(tuple, pts), rng.choice([-1, 1], n).tolist()))
        v, w = flat_norm_zero(T, D)
        ref = brute_flat_norm(T.atoms, D.lo, D.hi)
        worst = max(worst, abs(v - ref) / max(ref, 1e-300))
        witness_ok &= boundary_one(w, D) == T
    ok = worst <= 1e-9 and witness_ok
    assert verdict(4, ok, f"500 instances, max rel deviation {worst:.1e} (tol 1e-9), witness boundary exact: {witness_ok}",
                   time.perf_counter() - t0, 60)


def test_criterion_05_sequence_inequality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = math.inf
    for _ in range(100_000):
        a = rng.integers(0, 21, int(rng.integers(1, 9)))
        beta = rng.uniform(1, 2)
        lam = rng.uniform(0.75, 1)
        if beta <= 1 or lam <= 0.75:
            continue
        lhs, rhs = lemma_ai_check(a, beta, lam)
        worst = min(worst, lhs - rhs)
    ok = worst >= -1e-12
    assert verdict(5, ok, f"1e5 instances, min slack {worst:.3e} (tol -1e-12)", time.perf_counter() - t0, 10)


def test_criterion_06_boundary_lemma():
    t0 = time.perf_counter()
    h = 1 / 128
    D = box_lattice((-1.25, -1.25), (1.25, 1.25), h)
    c = (0.3 * h, 0.42 * h)
    out = {}
    for d in (1, 2, 3):
        f = product_vortex([(c, d)], D, h)
        for r in (0.5, 1.0):
            lhs, rhs = boundary_energy_lower_bound(f, (0.0, 0.0), r, 1.5)
            out[(d, r)] = lhs / rhs
    ok = all(0.99 <= v <= 1.03 for v in out.values())
    msg = f"LHS/RHS in [{min(out.values()):.4f}, {max(out.values()):.4f}] (band [0.99,1.03])"
    assert verdict(6, ok, msg, time.perf_counter() - t0, 30)


def test_criterion_07_vorticity_and_deformation():
    t0 = time.perf_counter()
    h = 1 / 16
    D = box_lattice((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5), h)
    S = face_vorticity_3d(axis_vortex_3d((0.01, 0.02, 0.03), 2, D, h))
    mids = np.array([a for a, b, m in S])
    chain_ok = (boundary_one(S, D) == ZeroCurrent(dim=3) and len(S) > 0
                and np.ptp(mids[:, 0]) == 0 and np.ptp(mids[:, 1]) == 0
                and all(np.allclose(np.subtract(b, a), (0, 0, h)) for a, b, m in S))

    fx = load_fixture("square_loop")
    loop = current_from_json(fx["current"])
    a, _ = select_shift(loop, None, 0.25, 0.5, seed=0)
    g = GridSpec(0.25, a)
    Sd = deform_to_dual(loop, g)
    I = intersection_numbers(loop, g)
    deform_ok = bool(I) and not boundary_one(Sd) and dual_edge_multiplicities(Sd, g) == I

    delta = 0.5
    freq = acceptance_frequency(loop, 0.25, delta, samples=1000, seed=0)
    floor = 0.8 * delta / (2 + 2 * delta)
    ok = chain_ok and deform_ok and freq >= floor
    msg = (f"axis chain boundary-free and collinear: {chain_ok}; dual loop closed with multiplicities "
           f"= intersection numbers on {len(I)} cells: {deform_ok}; acceptance {freq:.3f} >= {floor:.3f}")
    assert verdict(7, ok, msg, time.perf_counter() - t0, 120)


def test_criterion_08_minimizer():
    t0 = time.perf_counter()
    parts = []
    ok = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for d in (1, 2):
            datum = BoundaryDatum(d, 128)
            opts = SolveOptions(1.5)
            res = minimize(datum, opts)
            T = vortices(res.field, res.active)
            pb = problem_from_datum(datum, initial_phase(datum))
            recovery = float(np.sum(energy_density_map(pb.theta, pb.h, 1.5, pb.active)))
            good = T.total() == d and res.report.rescaled <= recovery
            part = f"d={d}: vorticity {T.total()}, energy {res.report.rescaled:.4f} <= product {recovery:.4f}"
            if d == 1:
                dist = float(np.linalg.norm(T.points[0])) if len(T) == 1 else math.inf
                good &= dist <= 3 * datum.h
                part += f", center offset {dist:.4f} <= 3h={3 * datum.h:.4f}"
            ok &= bool(good)
            parts.append(part)
        recs = vortex_sweep(BoundaryDatum(1, 128), [1.8, 1.6, 1.4], SolveOptions(1.8))
    conc = [r.concentration for r in recs]
    trend = all(conc[k] <= conc[k + 1] for k in range(len(conc) - 1))
    ok &= trend
    parts.append("concentration along p=1.8,1.6,1.4: " + ", ".join(f"{c:.3f}" for c in conc)
                 + f" non-decreasing: {trend}")
    assert verdict(8, ok, "; ".join(parts), time.perf_counter() - t0, 300)


def test_criterion_09_continuity_bound():
    t0 = time.perf_counter()
    c = np.array([0.013, -0.021])
    maxima = {}
    for h in (1 / 64, 1 / 128, 1 / 256):
        D = box_lattice((-1, -1), (1, 1), h)
        u = product_vortex([(tuple(c), 1)], D, h)
        X, Y = np.meshgrid(u.axis_coords(0), u.axis_coords(1), indexing="ij")
        family = []
        for s in (0.05, 0.1, 0.2, 0.4):
            family.append(product_vortex([(tuple(c + (s, 0.3 * s)), 1)], D, h))
        for eps in (0.1, 0.3):
            family.append(LatticeField(D, h, u.values + eps * np.sin(np.pi * X) * np.cos(np.pi * Y)))
        family.append(product_vortex([(tuple(c), 1), ((0.4, 0.3), 1), ((-0.35, 0.45), -1)], D, h))
        maxima[h] = max(continuity_ratio(u, v, 1.5) for v in family)
    spread = max(maxima.values()) / min(maxima.values())
    msg = ", ".join(f"h=1/{round(1 / h)}: {m:.4f}" for h, m in maxima.items()) + f"; spread {spread:.3f} < 2"
    assert verdict(9, spread < 2, msg, time.perf_counter() - t0, 120)


DETERMINISM_RUNS = [
    ("sweep", {"params": {"current": {"fixture": "three_atoms"}, "p_values": [1.2, 1.3]}, "seed": 3}),
    ("deform", {"params": {"current": {"fixture": "square_loop"}, "ell": 0.25}, "seed": 11}),
    ("decompose", {"params": {"current": {"fixture": "three_atoms"}, "p": 1.9, "alpha": 0.9}, "seed": 0}),
    ("minimize", {"params": {"degree": 2, "grid": 48, "p": 1.6, "max_sweeps": 200}, "seed": 5}),
]


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    mismatched = []
    files = 0
    for kind, cfg in DETERMINISM_RUNS:
        path = tmp_path / f"{kind}.json"
        path.write_text(json.dumps(cfg))
        dirs = []
        for threads in (1, 8):
            out = tmp_path / f"{kind}_t{threads}"
            assert run([kind, "--config", str(path), "--out", str(out), "--threads", str(threads)]) == 0
            dirs.append(out)
        names = sorted(q.name for q in dirs[0].iterdir() if q.name != "manifest.json")
        files += len(names)
        for n in names:
            if (dirs[0] / n).read_bytes() != (dirs[1] / n).read_bytes():
                mismatched.append(f"{kind}/{n}")
        m1, m8 = (json.loads((q / "manifest.json").read_text())["outputs"] for q in dirs)
        if m1 != m8:
            mismatched.append(f"{kind}/manifest hashes")
    msg = f"{files} output files over {len(DETERMINISM_RUNS)} kinds at threads 1 and 8, mismatches: {mismatched or 'none'}"
    assert verdict(10, not mismatched, msg, time.perf_counter() - t0, math.inf)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
