import math
import warnings

import numpy as np
import pytest

from gammaflow.currents import BoxDomain, ZeroCurrent
from gammaflow.recovery import (CSV_FIELDS, RecoveryPlan, default_h, lattice_step, limsup_sweep_2d,
                                limsup_sweep_3d, prescribed_jacobian_min_energy_gap, snap_to_plaquettes,
                                streamed_product_vortex, tube_prediction)
from gammaflow.fields import box_lattice, p_energy, product_vortex
from gammaflow.jacobian import plaquette_vorticity

from oracles import exact_single_vortex_energy

UNIT = BoxDomain((0.0, 0.0), (1.0, 1.0))
THREE = ZeroCurrent([((0.27, 0.31), 1), ((0.71, 0.36), -1), ((0.48, 0.74), 1)])
SQUARE = np.array([(-0.487, -0.479, 0.017), (0.513, -0.479, 0.017), (0.513, 0.521, 0.017), (-0.487, 0.521, 0.017)])


def test_default_h_and_step():
    assert default_h(1.5) == pytest.approx(math.exp(-6) / 4)
    h = lattice_step(UNIT, 0.3)
    assert h <= 0.3 and abs(1 / h - round(1 / h)) < 1e-9


def test_snap():
    s, disp = snap_to_plaquettes(ZeroCurrent([((0.26, 0.74), 1)]), UNIT, 0.1)
    assert s.points[0] == pytest.approx([0.25, 0.75]) and disp == pytest.approx(math.hypot(0.01, 0.01))


def test_streamed_matches_dense():
    h = 1 / 64
    D = box_lattice((0, 0), (1, 1), h)
    pts, degs = np.array([[0.3 + h / 2, 0.6 + h / 2], [0.7 + h / 2, 0.2 + h / 2]]), [1, -1]
    res = streamed_product_vortex(pts, degs, UNIT, h, 1.5, block_rows=7)
    fld = product_vortex(list(zip(map(tuple, pts), degs)), D, h)
    assert res.energy == pytest.approx(p_energy(fld, 1.5).total, rel=1e-12)
    assert res.vorticity == plaquette_vorticity(fld)


def test_empty_target():
    row, = limsup_sweep_2d(ZeroCurrent(dim=2), UNIT, RecoveryPlan([1.5]))
    assert row.rescaled_energy == 0.0 and row.target == 0.0


def test_single_centered_atom():
    p = 1.5
    row, = limsup_sweep_2d(ZeroCurrent([((0.5, 0.5), 1)]), UNIT, RecoveryPlan([p]))
    assert row.h <= math.exp(-6) / 4
    analytic = (2 - p) * exact_single_vortex_energy((0.5, 0.5), p)
    assert abs(row.rescaled_energy / analytic - 1) < 0.10
    assert row.flat_distance == 0.0


def test_three_atoms_exact_recovery():
    rows = limsup_sweep_2d(THREE, UNIT, RecoveryPlan([1.2, 1.3]))
    for r in rows:
        assert r.target == pytest.approx(6 * math.pi)
        assert r.flat_distance == 0.0
        assert 0.75 <= r.ratio <= 1.05
        assert r.tube_part + r.skeleton_part + r.exterior_part == pytest.approx(r.rescaled_energy, rel=1e-9)
        assert min(r.tube_part, r.exterior_part) >= 0
        assert len(r.csv_values()) == len(CSV_FIELDS)


def test_too_close_atoms():
    T = ZeroCurrent([((0.5, 0.5), 1), ((0.501, 0.5), -1)])
    with pytest.raises(ValueError, match="too close"):
        limsup_sweep_2d(T, UNIT, RecoveryPlan([1.2]))
    with pytest.raises(ValueError):
        limsup_sweep_2d(ZeroCurrent([((0.5, 0.5), 2)]), UNIT, RecoveryPlan([1.2]))


def test_tube_prediction_limits():
    # tubes of constant radius when gamma is huge
    V = SQUARE
    val = tube_prediction(V, 1.4, 0.2, 1e9)
    assert val == pytest.approx(2 * math.pi * 4 * 0.2 ** 0.6, rel=1e-6)
    assert tube_prediction(V, 1.4, 0.1, 1.0) < tube_prediction(V, 1.4, 0.2, 1.0)


def test_square_loop_3d():
    D = BoxDomain((-1, -1, -1), (1, 1, 1))
    plan = RecoveryPlan([1.4, 1.99], delta_tube=0.2, gamma_tube=1.0)
    rows = limsup_sweep_3d(SQUARE, D, plan, 1 / 24)
    r14, r199 = rows
    assert r14.target == pytest.approx(8 * math.pi)
    for r in rows:
        assert r.tube_part + r.skeleton_part + r.exterior_part == pytest.approx(r.rescaled_energy, rel=1e-9)
        assert r.extra["extracted_closed"]
    assert 0.7 < r14.ratio < 1.05
    assert r199.exterior_part < 0.05 * r14.exterior_part
    rev = limsup_sweep_3d(SQUARE[::-1], D, plan, 1 / 24)
    assert rev[0].rescaled_energy == pytest.approx(r14.rescaled_energy, rel=1e-9)


def test_3d_boundary_precondition():
    with pytest.raises(ValueError):
        limsup_sweep_3d(SQUARE * 1.9, BoxDomain((-1, -1, -1), (1, 1, 1)), RecoveryPlan([1.4]), 1 / 16)


def test_min_energy_gap():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert prescribed_jacobian_min_energy_gap(ZeroCurrent(dim=2), UNIT, 1.3) == (0.0, 0.0)
        rec, mn = prescribed_jacobian_min_energy_gap(ZeroCurrent([((0.5, 0.5), 1)]), UNIT, 1.3, h=1 / 48,
                                                     max_sweeps=100)
        assert mn <= rec and mn >= 0.75 * rec
        prev = math.inf
        for s in (0.3, 0.2, 0.1):
            T = ZeroCurrent([((0.5 - s / 2, 0.5), 1), ((0.5 + s / 2, 0.5), -1)])
            _, e = prescribed_jacobian_min_energy_gap(T, UNIT, 1.3, h=1 / 48, max_sweeps=100)
            assert e < prev
            prev = e
    with pytest.raises(ValueError):
        prescribed_jacobian_min_energy_gap(THREE, UNIT, 1.9)
