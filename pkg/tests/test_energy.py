import numpy as np
import pytest

from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from circlift.energy import at_energy, corner_mean, mm_energy, ms_circle_value, ms_lift_value
from circlift.exceptions import DomainViolationError, ParameterError
from circlift.examples import recovery_surface_prediction
from circlift.grid import AngleField, EdgeSet, ScalarField, dirichlet_energy, distance_to_segments, make_domain
from circlift.lifting import jump_min_lifting

SMALL = make_domain("square(1)", 6)


def test_constant_field_costs_nothing(disk_33):
    u = AngleField(disk_33, np.full(disk_33.shape, 1.3))
    report = at_energy(u, ScalarField.full(disk_33, 1.0), 0.1)
    assert report.total == 0.0
    assert report.surface == 0.0


def test_v_one_is_dirichlet(disk_33):
    X, Y = disk_33.node_coords()
    u = AngleField(disk_33, np.arctan2(Y, X))
    report = at_energy(u, ScalarField.full(disk_33, 1.0), 0.05)
    assert report.bulk == pytest.approx(dirichlet_energy(u))
    assert report.grad_v == 0.0
    assert report.well == 0.0


def test_lifted_regime_uses_plain_differences(unit_square_17):
    X, _ = unit_square_17.node_coords()
    phi = ScalarField(unit_square_17, 8.0 * X)
    v = ScalarField.full(unit_square_17, 1.0)
    assert at_energy(phi, v, 0.1).bulk == pytest.approx(64.0)
    # As an angle field the increments 8 h = 0.5 stay below pi, same value.
    assert at_energy(phi.as_angles(), v, 0.1).bulk == pytest.approx(64.0)


def test_validation(unit_square_3, unit_square_17):
    u = AngleField(unit_square_3, np.zeros((3, 3)))
    v = ScalarField.full(unit_square_3, 1.0)
    for eps in (0.0, -0.1, 1.5):
        with pytest.raises(ParameterError):
            at_energy(u, v, eps)
    with pytest.raises(DomainViolationError):
        at_energy(u, ScalarField.full(unit_square_3, 1.5), 0.1)
    with pytest.raises(ParameterError):
        at_energy(u, ScalarField.full(unit_square_17, 1.0), 0.1)


def test_corner_mean():
    a = np.arange(6.0).reshape(2, 3)
    assert np.allclose(corner_mean(a), [[2.0, 3.0]])


def test_report_dict(disk_33):
    u = AngleField(disk_33, np.zeros(disk_33.shape))
    data = at_energy(u, ScalarField.full(disk_33, 0.5), 0.2).to_dict()
    assert data['schema_version'] == 1
    assert data['surface'] == pytest.approx(data['grad_v'] + data['well'])
    assert data['total'] == pytest.approx(data['bulk'] + data['surface'])


def test_mm_profile_costs_one_per_unit_length():
    domain = make_domain("rect(1,0.1)", 401)
    X, _ = domain.node_coords()
    eps = 0.05
    v = ScalarField(domain, 1.0 - np.exp(-np.abs(X - 0.5) / (2.0 * eps)))
    assert mm_energy(v, eps) == pytest.approx(0.1, rel=5e-3)


def test_mm_profile_costs_a_half_per_side():
    eps = 0.05
    domain = make_domain("rect(0.5,0.05)", 201)
    assert domain.h == pytest.approx(eps / 20.0)
    X, _ = domain.node_coords()
    v = ScalarField(domain, 1.0 - np.exp(-X / (2.0 * eps)))
    rows = domain.cell_mask.sum(axis=0)[0]
    per_side = mm_energy(v, eps) / (rows * domain.h)
    assert per_side == pytest.approx(0.5, abs=1e-3)


def test_mm_tube_around_a_unit_segment():
    eps = 0.01
    domain = make_domain("rect(1.4,0.4)", 701)
    seg = [((0.2, 0.2), (1.2, 0.2))]
    dist = distance_to_segments(domain, seg).values
    v = ScalarField(domain, 1.0 - np.exp(-dist / (2.0 * eps)))
    value = mm_energy(v, eps)
    assert value == pytest.approx(1.0, rel=0.05)
    # Two half disks of radius ~ eps close the tube at the ends.
    assert value == pytest.approx(recovery_surface_prediction(1.0, 2, eps, 0.0), rel=1e-2)


def test_mm_restricted_cells(unit_square_17):
    v = ScalarField.full(unit_square_17, 0.0)
    full = mm_energy(v, 0.25)
    assert full == pytest.approx(1.0)
    left = np.zeros_like(unit_square_17.cell_mask)
    left[:, :8] = True
    assert mm_energy(v, 0.25, cells=left) == pytest.approx(0.5)


def test_ms_circle_value_of_a_step(unit_square_17):
    X, _ = unit_square_17.node_coords()
    u = AngleField(unit_square_17, np.where(X > 0.5, 1.0, 0.0))
    ax, _ = unit_square_17.edge_active()
    jumps = np.zeros_like(ax)
    jumps[:, 8] = True
    assert ms_circle_value(u, EdgeSet(unit_square_17, ex=jumps)) == pytest.approx(1.0)


def test_ms_lift_value_adds_the_cut(disk_65):
    X, Y = disk_65.node_coords()
    u = AngleField(disk_65, np.arctan2(Y, X))
    result = jump_min_lifting(u)
    value = ms_lift_value(u, result)
    assert value == pytest.approx(dirichlet_energy(u) + result.jump_length)
    assert result.jump_length == pytest.approx(1.0, abs=2.0 * disk_65.h)


@settings(max_examples=40, deadline=None, derandomize=True)
@given(arrays(float, SMALL.shape, elements=st.floats(-10.0, 10.0)),
       arrays(float, SMALL.shape, elements=st.floats(0.0, 1.0)),
       st.floats(0.01, 1.0))
def test_energy_is_nonnegative_and_split(theta, v, eps):
    report = at_energy(AngleField(SMALL, theta), ScalarField(SMALL, v), eps)
    assert report.bulk >= 0.0
    assert report.grad_v >= 0.0
    assert report.well >= 0.0
    assert report.total == pytest.approx(report.bulk + report.grad_v + report.well)


@settings(max_examples=40, deadline=None, derandomize=True)
@given(st.floats(-10.0, 10.0), st.integers(-3, 3), st.floats(0.05, 1.0))
def test_energy_is_gauge_invariant(c, k, eps):
    X, Y = SMALL.node_coords()
    u = AngleField(SMALL, np.arctan2(Y - 0.45, X - 0.55) + X)
    v = ScalarField(SMALL, 0.5 + 0.5 * np.cos(3.0 * X * Y))
    base = at_energy(u, v, eps)
    moved = at_energy(u.shifted(c + 2.0 * np.pi * k), v, eps)
    assert moved.bulk == pytest.approx(base.bulk, rel=1e-9)
    assert moved.total == pytest.approx(base.total, rel=1e-9)
