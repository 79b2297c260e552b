import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gammaflow.currents import OneCurrent, boundary_one, polygon
from gammaflow.fields import box_lattice, solid_angle_vortex
from gammaflow.grids import (CellRef, GridSpec, acceptance_frequency, deform_to_dual,
                             distance_integral, distance_integral_scaling, dual_edge_multiplicities,
                             intersection_numbers, phi, select_shift, skeleton_distance)
from gammaflow.jacobian import face_vorticity_3d

from oracles import brute_skeleton_distance

G0 = GridSpec(1.0, (0.0, 0.0, 0.0))
SQUARE = np.array([(-0.487, -0.479, 0.017), (0.513, -0.479, 0.017), (0.513, 0.521, 0.017), (-0.487, 0.521, 0.017)])


def test_skeleton_distance_examples():
    assert skeleton_distance((0.5, 0.5, 0.5), G0, 2) == 0.5
    assert skeleton_distance((1.0, 2.0, -3.0), G0, 0) == 0.0
    assert skeleton_distance((0.5, 0.5, 0.5), G0, 0) == pytest.approx(np.sqrt(0.75))
    assert skeleton_distance((0.3, 0.1, 0.7), G0, 3) == 0.0


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(0.2, 3.0),
       st.lists(st.floats(0, 1), min_size=3, max_size=3), st.integers(0, 3))
@settings(max_examples=200, deadline=None)
def test_skeleton_distance_brute(x, ell, frac, h):
    a = tuple(f * ell for f in frac)
    g = GridSpec(ell, a)
    assert skeleton_distance(x, g, h) == pytest.approx(brute_skeleton_distance(x, ell, np.array(a), h), abs=1e-12)


def test_skeleton_distance_2d():
    g = GridSpec(0.5, (0.1, 0.2), d=2)
    x = (0.73, 0.41)
    for h in range(3):
        assert skeleton_distance(x, g, h) == pytest.approx(brute_skeleton_distance(x, 0.5, np.array([0.1, 0.2]), h))


def test_dual_cells():
    for h in range(4):
        for axes in __import__("itertools").combinations(range(3), h):
            Q = CellRef(h, (2, -1, 0), axes)
            Qd = Q.dual()
            assert Qd.h == 3 - h and Qd.on_dual
            assert Qd.dual() == Q
            g = GridSpec(0.7, (0.1, 0.2, 0.3))
            assert np.allclose(Q.center(g), Qd.center(g))


def test_vertical_segment_example():
    seg = OneCurrent([((0.2, 0.2, 0.2), (0.2, 0.2, 2.7), 1)])
    assert intersection_numbers(seg, G0) == {(0, 0, 1, 2): 1, (0, 0, 2, 2): 1}
    assert intersection_numbers(-seg, G0) == {(0, 0, 1, 2): -1, (0, 0, 2, 2): -1}


def test_square_loop_deformation():
    loop = polygon(SQUARE)
    for ell, seed in ((0.25, 0), (0.3, 1), (0.17, 2)):
        a, diag = select_shift(loop, None, ell, 0.5, seed=seed)
        g = GridSpec(ell, a)
        S = deform_to_dual(loop, g)
        I = intersection_numbers(loop, g)
        assert I and not boundary_one(S)
        assert dual_edge_multiplicities(S, g) == I
        # orientation reversal
        assert deform_to_dual(-loop, g) == -S


def test_loop_inside_one_cube_is_null():
    tri = polygon([(0.1, 0.1, 0.1), (0.3, 0.12, 0.15), (0.2, 0.35, 0.2)])
    assert not deform_to_dual(tri, G0)
    assert intersection_numbers(tri, G0) == {}


def test_closedness_over_cube_faces():
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1.3, 1.3, (9, 3))
    loop = polygon(pts)
    a, _ = select_shift(loop, None, 0.4, 0.5, seed=3)
    g = GridSpec(0.4, a)
    I = intersection_numbers(loop, g)
    cubes = {k[:3] for k in I}
    for c in cubes:
        flux = 0
        for ax in range(3):
            lo = list(c)
            hi = list(c)
            hi[ax] += 1
            # flux out of the cube through its two faces normal to ax
            flux += I.get((*hi, ax), 0) - I.get((*lo, ax), 0)
        assert flux == 0
    S = deform_to_dual(loop, g)
    assert not boundary_one(S)
    assert dual_edge_multiplicities(S, g) == I


def test_shift_covariance():
    loop = polygon(SQUARE)
    a, _ = select_shift(loop, None, 0.25, 0.5, seed=7)
    v = np.array([0.11, -0.07, 0.05])
    moved = polygon(SQUARE + v)
    assert intersection_numbers(moved, GridSpec(0.25, tuple(np.add(a, v)))) == intersection_numbers(loop, GridSpec(0.25, a))


def test_phi_maps_cube_into_itself():
    rng = np.random.default_rng(0)
    g = GridSpec(0.5, (0.1, 0.2, 0.3))
    x = rng.uniform(-2, 2, (2000, 3))
    y = phi(x, g)
    cube = np.floor(g.to_lattice(x))
    u = g.to_lattice(y)
    assert np.all(u >= cube - 1e-12) and np.all(u <= cube + 1 + 1e-12)
    # every image lies on a dual edge: two coordinates at half-integers
    half = np.abs(u - np.floor(u) - 0.5) < 1e-9
    assert np.all(half.sum(axis=1) >= 2)


def test_phi_sends_faces_to_centers():
    g = GridSpec(1.0, (0.0, 0.0, 0.0))
    x = np.array([[0.3, 0.8, 2.0], [0.9, 0.1, 2.0], [0.51, 0.49, 2.0]])
    assert np.allclose(phi(x, g), [[0.5, 0.5, 2.0]] * 3)
    with pytest.raises(ValueError):
        phi([[0.0, 0.5, 0.0]], g)


def test_select_shift_rejects_vertex_grid():
    # the loop passes through lattice lines of the unshifted grid
    loop = polygon([(0.0, 0.0, 0.5), (1.0, 0.2, 0.5), (0.5, 1.0, 0.5)])
    from gammaflow.grids import ShiftSampler
    s = ShiftSampler(loop, 1.0, 0.5)
    assert s.verdict((0.0, 0.0, 0.0))[0] == "margin"


def test_select_shift_reproducible():
    loop = polygon(SQUARE)
    assert select_shift(loop, None, 0.25, 0.5, seed=3)[0] == select_shift(loop, None, 0.25, 0.5, seed=3)[0]


def test_axis_segment_mostly_accepted():
    loop = polygon([(0.3, 0.4, 0.1), (0.3, 0.4, 3.9), (0.32, 0.43, 2.0)])
    assert acceptance_frequency(loop, 1.0, 0.5, samples=200) > 0.7


def test_vorticity_intersections_match_windings():
    h = 1 / 16
    D = box_lattice((-1, -1, -1), (1, 1, 1), h)
    S = face_vorticity_3d(solid_angle_vortex(polygon(SQUARE), D, h))
    # dual edges of the field lattice are cube-center chains of the grid G(h, lo)
    g = GridSpec(h, D.lo)
    mult = dual_edge_multiplicities(S, g)
    assert sum(abs(v) for v in mult.values()) == len(S)


def test_distance_integral_examples():
    line = [((0, 0, 0), (0, 0, 1))]
    assert distance_integral_scaling(line, 1, 0.1) == pytest.approx(2, rel=0.15)
    assert distance_integral([((0.0, 0.0), (0.0, 0.0))], 1, 0.2) == pytest.approx(2 * np.pi * 0.2, rel=0.05)
    # p = 0: plain tube volume pi t^2 L + 4/3 pi t^3
    v = distance_integral(line, 0, 0.1)
    assert v == pytest.approx(np.pi * 0.01 + 4 / 3 * np.pi * 1e-3, rel=0.02)
    with pytest.raises(ValueError):
        distance_integral(line, 2, 0.1)
    with pytest.raises(RuntimeError, match="starvation"):
        distance_integral(line, 1, 1e-4, samples=2 ** 10)
