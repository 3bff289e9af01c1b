import math

import numpy as np
import pytest

from couplex.harnack import (
    CylinderCells,
    SphereCells,
    elliptic_harnack_check,
    md_via_elliptic,
    md_via_parabolic_corollary,
    parabolic_harnack_check,
    sample_parabolic_boundary,
)
from couplex.mixing import BinGrid
from couplex.sde import IntegratorConfig, make_model


def test_cylinder_cells_validation():
    with pytest.raises(ValueError):
        CylinderCells(eps=0.0)
    with pytest.raises(ValueError):
        CylinderCells(eps=1.0)
    with pytest.raises(ValueError):
        CylinderCells(eps=0.1, n_time=0)


def test_cylinder_classify_2d_handmade():
    cells = CylinderCells(eps=0.2, n_time=4, n_angle=4, n_radius=3)
    assert cells.n_cells(2) == 4 * 4 + 3 * 4
    assert len(cells.labels(2)) == cells.n_cells(2)
    tau = np.array([0.1, 0.2, 0.95, 0.6, 0.8, 0.4])
    states = np.array(
        [
            [1.0, 0.0],   # early exit -> excluded
            [1.0, 0.0],   # lateral, first time band, angle 0 -> sector 2
            [0.0, -1.0],  # lateral, last time band, angle -pi/2 -> sector 1
            [0.3, 0.0],   # top, inner ring (r < sqrt(1/3))
            [0.0, 0.7],   # top, middle ring (sqrt(1/3) <= r < sqrt(2/3))
            [0.95, 0.0],  # top, outer ring
        ]
    )
    exited = np.array([True, True, True, False, False, False])
    idx = cells.classify(tau, states, exited)
    offset = 4 * 4
    assert idx.tolist() == [-1, 2, 3 * 4 + 1, offset + 2, offset + 1 * 4 + 3, offset + 2 * 4 + 2]


def test_cylinder_classify_1d_handmade():
    cells = CylinderCells(eps=0.2, n_time=2, n_angle=8, n_radius=2)
    assert cells.n_cells(1) == 2 * 2 + 2  # two boundary points, two lid halves
    tau = np.array([0.5, 0.9, 0.3, 0.3])
    states = np.array([[1.0], [-1.0], [0.5], [-0.5]])
    exited = np.array([True, True, False, False])
    idx = cells.classify(tau, states, exited)
    assert idx.tolist() == [1, 2, 5, 4]


def test_top_rings_have_equal_area():
    cells = CylinderCells(eps=0.1, n_radius=3)
    edges = np.sqrt(np.arange(4) / 3.0)
    areas = np.pi * np.diff(edges**2)
    assert np.allclose(areas, areas[0])


def test_sphere_cells_classify():
    cells = SphereCells(n_angle=4)
    pts = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    assert cells.classify(pts).tolist() == [2, 3, 3, 1]  # theta = pi lands in the last sector
    one_d = SphereCells().classify(np.array([[-0.5], [0.5]]))
    assert one_d.tolist() == [0, 1]
    assert SphereCells(5).n_cells(1) == 2
    assert SphereCells(5).n_cells(2) == 5


def test_boundary_measure_accounting():
    model = make_model("bm{d=2}")
    cells = CylinderCells(eps=0.1)
    cfg = IntegratorConfig(step=0.005, horizon=1.0, seed=41)
    bm = sample_parabolic_boundary(model, [0.0, 0.0], 0.0, 0.1, 2000, cells, cfg)
    assert bm.masses.sum() == pytest.approx(bm.captured, abs=1e-12)
    assert bm.captured + bm.early_mass == pytest.approx(1.0, abs=1e-12)
    assert bm.early_mass < 0.05  # exits of BM from 0 before t=0.1 are rare
    # started at time eps nothing can exit before eps
    bm2 = sample_parabolic_boundary(model, [0.0, 0.0], 0.1, 0.1, 500, cells, cfg.shifted(9))
    assert bm2.early_mass == 0.0


def test_parabolic_boundary_validation():
    model = make_model("bm{d=2}")
    cells = CylinderCells(eps=0.1)
    cfg = IntegratorConfig(step=0.01, horizon=1.0, seed=1)
    with pytest.raises(ValueError):
        sample_parabolic_boundary(model, [0.5, 0.0], 0.0, 0.1, 10, cells, cfg)
    with pytest.raises(ValueError):
        sample_parabolic_boundary(model, [0.0, 0.0], 1.0, 0.1, 10, cells, cfg)
    with pytest.raises(ValueError):
        sample_parabolic_boundary(model, [0.0, 0.0], 0.0, 0.2, 10, cells, cfg)
    with pytest.raises(NotImplementedError):
        sample_parabolic_boundary(make_model("bm{d=3}"), [0.0] * 3, 0.0, 0.1, 10, cells, cfg)


def test_parabolic_check_bound_on_shared_data():
    model = make_model("sign_drift{a=0.5,d=2}")
    cells = CylinderCells(eps=0.1)
    cfg = IntegratorConfig(step=0.005, horizon=1.0, seed=42)
    report = parabolic_harnack_check(
        model, [[0.0, 0.0], [0.2, 0.0]], [[0.0, 0.0]], 0.1, 4000, cells, cfg
    )
    assert report.n_hat >= 1.0
    assert report.bound_holds and not report.violations
    assert 0.0 < report.md_min <= 1.0
    assert report.q_hat <= 1.0
    assert report.md_matrix.shape == (2, 1)
    finite = report.cell_ratio_sup[~np.isnan(report.cell_ratio_sup)]
    assert finite.max() == pytest.approx(report.n_hat)


def test_corollary_bookkeeping():
    model = make_model("bm{d=2}")
    bins = BinGrid.regular([-3.0, -3.0], [3.0, 3.0], [20, 20])
    cfg = IntegratorConfig(step=0.01, horizon=1.0, seed=43)
    rep = md_via_parabolic_corollary(model, [[0.0, 0.0], [0.1, 0.0]], 0.1, 3000, bins, cfg)
    assert rep.q_prime == pytest.approx(rep.q_hat * rep.p_eps.min())
    assert 0.0 < rep.q_prime <= rep.q_hat <= 1.0
    assert rep.kappa > 0.5  # nearby starts share most of their time-1 law
    assert rep.kappa == rep.kappa_report.kappa
    with pytest.raises(ValueError):
        md_via_parabolic_corollary(model, [[0.5, 0.0]], 0.1, 100, bins, cfg)


def test_elliptic_uniformity_from_center():
    model = make_model("bm{d=2}")
    cells = SphereCells(n_angle=8)
    cfg = IntegratorConfig(step=0.002, horizon=1.0, seed=44)
    report = elliptic_harnack_check(model, 1.0, [[0.0, 0.0]], 10_000, cells, cfg)
    assert report.n_hat == 1.0  # single start: sup == inf cellwise
    assert report.excluded == 0
    assert np.abs(report.cell_masses - 0.125).max() < 0.015
    assert report.cell_masses.sum() == pytest.approx(1.0, abs=1e-12)


def test_elliptic_grid_validation():
    model = make_model("bm{d=2}")
    cfg = IntegratorConfig(step=0.01, horizon=1.0, seed=1)
    with pytest.raises(ValueError):
        elliptic_harnack_check(model, 1.0, [[0.5, 0.0]], 10, SphereCells(4), cfg)
    with pytest.raises(ValueError):
        elliptic_harnack_check(model, -1.0, [[0.0, 0.0]], 10, SphereCells(4), cfg)


def test_exit_ladder_is_monotone_on_shared_paths():
    model = make_model("bm{d=2}")
    cells = SphereCells(n_angle=8)
    cfg = IntegratorConfig(step=0.01, horizon=1.0, seed=45)
    rep = md_via_elliptic(model, 1.0, [2.0, 0.5, 1.0], [[0.0, 0.0], [0.1, 0.0]], 2000, cells, cfg)
    assert rep.horizons.tolist() == [0.5, 1.0, 2.0]
    assert rep.kappa_monotone and np.all(np.diff(rep.kappa) >= 0.0)
    assert rep.survival_monotone and np.all(np.diff(rep.survival_sup) <= 0.0)
    assert rep.kappa[-1] > 0.5
    # diagonal of the final overlap matrix is the captured (exited) mass
    diag = np.diag(rep.pair_overlap_final)
    assert np.allclose(diag, 1.0 - rep.per_start_survival[:, -1])


def test_exit_ladder_validation():
    model = make_model("bm{d=2}")
    cfg = IntegratorConfig(step=0.01, horizon=1.0, seed=1)
    with pytest.raises(ValueError):
        md_via_elliptic(model, 1.0, [], [[0.0, 0.0]], 10, SphereCells(4), cfg)
    with pytest.raises(ValueError):
        md_via_elliptic(model, 1.0, [-1.0], [[0.0, 0.0]], 10, SphereCells(4), cfg)
    with pytest.raises(ValueError):
        md_via_elliptic(model, 1.0, [1.0], [[1.0, 0.0]], 10, SphereCells(4), cfg)
