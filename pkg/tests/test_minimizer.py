import warnings

import numpy as np
import pytest

from gammaflow.fields import product_vortex
from gammaflow.minimizer import (BoundaryDatum, SolveOptions, concentration_ratio, energy_density_map,
                                 minimize, problem_from_datum, relax, vortex_sweep, vortices)

warnings.filterwarnings("ignore", message="sweep budget")


def test_constant_datum():
    res = minimize(BoundaryDatum(0, 32), SolveOptions(1.5))
    assert res.energy == 0.0 and np.all(res.field.values == 0)


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(2.0)
    with pytest.raises(ValueError):
        SolveOptions(1.5, tol=0)
    with pytest.raises(ValueError):
        BoundaryDatum(1, 16)
    with pytest.raises(ValueError):
        minimize(BoundaryDatum(1, 32), SolveOptions(1.95))


def test_disk_masks():
    pb = problem_from_datum(BoundaryDatum(1, 40))
    # free nodes have all four surrounding plaquettes active
    I, J = np.nonzero(pb.free)
    for i, j in zip(I, J):
        assert pb.active[i - 1:i + 1, j - 1:j + 1].all()
    X, Y = np.meshgrid(np.linspace(-1, 1, 40), np.linspace(-1, 1, 40), indexing="ij")
    assert np.all(X[pb.free] ** 2 + Y[pb.free] ** 2 < 1)


def test_degree_one_center():
    d = BoundaryDatum(1, 48)
    res = minimize(d, SolveOptions(1.5))
    T = vortices(res.field, res.active)
    assert T.total() == 1 and len(T) == 1
    assert np.linalg.norm(T.points[0]) <= 3 * d.h
    assert res.energy <= res.initial_energy
    assert all(b <= a * (1 + 1e-12) for a, b in zip(res.history, res.history[1:]))


def test_degree_two_total():
    res = minimize(BoundaryDatum(2, 40), SolveOptions(1.5, max_sweeps=400))
    assert vortices(res.field, res.active).total() == 2


def test_box_domain_and_variant():
    res = minimize(BoundaryDatum(1, 32, shape="box"), SolveOptions(1.5, variant=True, max_sweeps=200))
    assert vortices(res.field, res.active).total() == 1
    assert res.report.variant


def test_vortex_sweep_records():
    recs = vortex_sweep(BoundaryDatum(1, 40), [1.8, 1.5], SolveOptions(1.5, max_sweeps=300))
    assert [r.total_vorticity for r in recs] == [1, 1]
    assert recs[0].flat_to_previous is None and recs[1].flat_to_previous is not None
    assert 0 < recs[1].concentration <= 1


def test_zero_degree_wiggle():
    d = BoundaryDatum(0, 40, phase=lambda X, Y: 0.8 * np.sin(3 * np.arctan2(Y, X)))
    res = minimize(d, SolveOptions(1.5, max_sweeps=200))
    assert vortices(res.field, res.active).total() == 0


def test_density_map():
    d = BoundaryDatum(1, 40)
    pb = problem_from_datum(d)
    dens = energy_density_map(pb.theta, pb.h, 1.5, pb.active)
    rot = energy_density_map(pb.theta + 1.3, pb.h, 1.5, pb.active)
    assert np.allclose(dens, rot, rtol=1e-10, atol=1e-14)
    i, j = np.unravel_index(np.argmax(dens), dens.shape)
    c = -1 + (np.array([i, j]) + 0.5) * pb.h
    assert np.linalg.norm(c) < 2 * pb.h
    assert not energy_density_map(np.zeros((8, 8)), 0.1, 1.5).any()


def test_relax_preserves_vorticity():
    from gammaflow.fields import box_lattice
    h = 1 / 32
    D = box_lattice((0, 0), (1, 1), h)
    fld = product_vortex([((0.3 + h / 2, 0.5 + h / 2), 1), ((0.6 + h / 2, 0.5 + h / 2), -1)], D, h)
    res = relax(fld, SolveOptions(1.3, max_sweeps=60, preserve_vorticity=True))
    from gammaflow.jacobian import plaquette_vorticity
    assert plaquette_vorticity(res.field) == plaquette_vorticity(fld)
    assert res.energy < res.initial_energy


def test_concentration_ratio_bounds():
    d = BoundaryDatum(1, 40)
    res = minimize(d, SolveOptions(1.6, max_sweeps=100))
    T = vortices(res.field, res.active)
    c = concentration_ratio(res.field, res.report.density, T)
    assert 0 < c < 1
    assert concentration_ratio(res.field, res.report.density, T, radius=10) == pytest.approx(1.0)
