import numpy as np
import pytest

from hypothesis import given, settings, strategies as st

from circlift.exceptions import ConfigError, ParameterError
from circlift.grid import (TWO_PI, AngleField, EdgeSet, GridDomain, ScalarField, ShapeTag, dirichlet_energy,
                           distance_to_segments, edge_laplacian, grad_sq, grad_sq_circle, make_domain, pv_diff)

angles = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False)


@pytest.mark.parametrize("text", ["disk(0,0,1)", "disk(0.25,-1,2.5)", "square(1)", "rect(2,0.5)"])
def test_shape_tag_parse(text):
    tag = ShapeTag.parse(text)
    assert ShapeTag.parse(str(tag)) == tag


@pytest.mark.parametrize("text", ["disk(0,0)", "circle(1)", "square(-1)", "square", "rect(1,x)"])
def test_shape_tag_parse_rejects(text):
    with pytest.raises(ConfigError):
        ShapeTag.parse(text)


def test_nearest_boundary_point():
    disk = ShapeTag.disk()
    assert np.allclose(disk.nearest_boundary_point((0.5, 0.0)), (1.0, 0.0))
    assert np.allclose(disk.nearest_boundary_point((0.0, 0.0)), (1.0, 0.0))
    assert disk.boundary_distance((0.0, 0.3)) == pytest.approx(0.7)

    square = ShapeTag.square()
    assert np.allclose(square.nearest_boundary_point((0.2, 0.5)), (0.0, 0.5))
    assert square.boundary_distance((0.2, 0.5)) == pytest.approx(0.2)


def test_square_3_all_active(unit_square_3):
    d = unit_square_3
    assert d.shape == (3, 3)
    assert d.h == pytest.approx(0.5)
    assert d.n_active == 9
    assert d.cell_mask.all()


def test_rect_lattice():
    d = make_domain("rect(2,1)", 5)
    assert (d.nx, d.ny) == (5, 3)
    assert d.h == pytest.approx(0.5)


def test_resolution_floor():
    with pytest.raises(ConfigError):
        make_domain("square(1)", 1)


def test_coarse_resolution_warns(caplog):
    make_domain("square(1)", 4)
    assert "below 16" in caplog.text


@pytest.mark.parametrize("resolution", [32, 33, 64, 65])
def test_disk_center_is_a_plaquette_center(resolution):
    d = make_domain("disk(0,0,1)", resolution)
    X, Y = d.node_coords()
    assert np.hypot(X, Y).min() > 0.25 * d.h
    j, i = d.cell_index(0.0, 0.0)
    assert np.allclose(d.cell_center(j, i), (0.0, 0.0))


def test_disconnected_mask():
    with pytest.raises(ConfigError):
        GridDomain(3, 1, 1.0, [[True, False, True]], ShapeTag.square(2), (0.0, 0.0))


def test_empty_mask():
    with pytest.raises(ConfigError):
        GridDomain(2, 2, 1.0, np.zeros((2, 2), dtype=bool), ShapeTag.square(1), (0.0, 0.0))


def test_mask_is_read_only(disk_33):
    with pytest.raises(ValueError):
        disk_33.mask[0, 0] = True


def test_restrict(unit_square_17):
    X, _ = unit_square_17.node_coords()
    half = unit_square_17.restrict(X <= 0.5)
    assert half.n_active == 9 * 17
    assert half.shape == unit_square_17.shape


def test_edge_weights_and_length(unit_square_3):
    wx, wy = unit_square_3.edge_weights()
    assert np.allclose(wx, [[0.5, 0.5], [1.0, 1.0], [0.5, 0.5]])
    assert np.allclose(wy, wx.T)

    ax, ay = unit_square_3.edge_active()
    assert EdgeSet(unit_square_3, ax, ay).length() == pytest.approx(4.0)


def test_edge_set_algebra(unit_square_3):
    a = EdgeSet.from_edges(unit_square_3, [('x', 0, 0), ('y', 1, 2)])
    b = EdgeSet.from_edges(unit_square_3, [('y', 1, 2), ('x', 2, 1)])
    assert len(a | b) == 3
    assert list(a & b) == [('y', 1, 2)]
    assert ('x', 0, 0) in a - b
    assert ('y', 1, 2) not in a - b
    assert EdgeSet.from_edges(unit_square_3, a.to_list()) == a


def test_edge_set_rejects_inactive(disk_33):
    ex = np.zeros((disk_33.ny, disk_33.nx - 1), dtype=bool)
    ex[0, 0] = True
    with pytest.raises(ParameterError):
        EdgeSet(disk_33, ex=ex)
    with pytest.raises(ParameterError):
        EdgeSet(disk_33).add('x', 0, 0)


def test_pv_diff_tie():
    assert pv_diff(np.pi, 0.0) == pytest.approx(np.pi)
    assert pv_diff(-np.pi, 0.0) == pytest.approx(np.pi)
    assert pv_diff(0.1, TWO_PI) == pytest.approx(0.1)


@settings(max_examples=200, deadline=None, derandomize=True)
@given(angles, angles)
def test_pv_diff_range(a, b):
    r = pv_diff(a, b)
    assert -np.pi < r <= np.pi
    k = (a - b - r) / TWO_PI
    assert abs(k - round(k)) < 1e-9


@settings(max_examples=50, deadline=None, derandomize=True)
@given(st.floats(min_value=-10.0, max_value=10.0), st.integers(min_value=-3, max_value=3))
def test_grad_sq_circle_is_gauge_invariant(c, k):
    d = make_domain("disk(0,0,1)", 17)
    X, Y = d.node_coords()
    u = AngleField(d, np.arctan2(Y, X))
    v = u.shifted(c + TWO_PI * k)
    assert np.allclose(grad_sq(u), grad_sq(v), atol=1e-9)


def test_grad_sq_circle_linear_phase_with_wraps(unit_square_17):
    X, _ = unit_square_17.node_coords()
    u = AngleField(unit_square_17, np.mod(40.0 * X, TWO_PI))
    assert np.allclose(grad_sq_circle(u), 1600.0)


def test_vortex_dirichlet_energy_on_an_annulus():
    d = make_domain("disk(0,0,1)", 257)
    X, Y = d.node_coords()
    g = grad_sq_circle(AngleField(d, np.arctan2(Y, X)))
    cx, cy = d.cell_centers()
    r = np.hypot(cx, cy)
    ring = d.cell_mask & (r > 0.2) & (r < 0.9)
    assert g[ring].sum() * d.h ** 2 == pytest.approx(TWO_PI * np.log(0.9 / 0.2), rel=0.03)


def test_grad_sq_linear_scalar(unit_square_17):
    X, Y = unit_square_17.node_coords()
    phi = ScalarField(unit_square_17, 2.0 * X - Y)
    assert np.allclose(grad_sq(phi), 5.0)
    assert dirichlet_energy(phi) == pytest.approx(5.0)


def test_dirichlet_excludes_cells(unit_square_3):
    X, _ = unit_square_3.node_coords()
    phi = ScalarField(unit_square_3, X)
    cut = EdgeSet.from_edges(unit_square_3, [('y', 0, 1)])
    # The cut edge borders the two bottom cells.
    assert dirichlet_energy(phi, exclude=cut) == pytest.approx(0.5)


def test_field_rejects_non_finite(unit_square_3):
    bad = np.zeros((3, 3))
    bad[1, 1] = np.nan
    with pytest.raises(ParameterError):
        AngleField(unit_square_3, bad)
    with pytest.raises(ParameterError):
        ScalarField(unit_square_3, np.zeros((2, 3)))


def test_circle_equal(disk_33):
    X, Y = disk_33.node_coords()
    u = AngleField(disk_33, np.arctan2(Y, X))
    assert u.circle_equal(u.shifted(4.0 * np.pi))
    assert not u.circle_equal(u.shifted(0.1))


def test_distance_to_segments(unit_square_17):
    d = distance_to_segments(unit_square_17, [((0.0, 0.5), (1.0, 0.5))]).values
    assert d[8].max() == pytest.approx(0.0)
    assert d[0, 0] == pytest.approx(0.5)

    with pytest.raises(ParameterError):
        distance_to_segments(unit_square_17, [])


def test_edge_laplacian(unit_square_3):
    wx, wy = unit_square_3.edge_weights()
    lap = edge_laplacian(unit_square_3, wx, wy).toarray()
    assert np.allclose(lap, lap.T)
    assert np.allclose(lap.sum(axis=1), 0.0)
    assert np.all(np.linalg.eigvalsh(lap) > -1e-12)
