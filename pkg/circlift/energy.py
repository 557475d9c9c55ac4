import logging

from dataclasses import dataclass

from circlift.exceptions import DomainViolationError, ParameterError
from circlift.grid import cell_grad_sq, dirichlet_energy, edge_diffs, grad_sq
from circlift.lifting import check_residual
from circlift.utils import SCHEMA_VERSION

logger = logging.getLogger('circlift')

V_SLACK = 1e-12


@dataclass
class EnergyReport:
    """
    The terms of AT_eps evaluated on a grid, reported separately so the bulk
    and surface parts can be compared on their own.
    """
    bulk: float
    grad_v: float
    well: float
    total: float
    eps: float

    @property
    def surface(self):
        return self.grad_v + self.well

    def to_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'bulk': self.bulk,
            'grad_v': self.grad_v,
            'well': self.well,
            'surface': self.surface,
            'total': self.total,
            'eps': self.eps,
        }


def corner_mean(a):
    """
    Average of a nodal array over the four corners of every cell.

    Args:
        a (ndarray): (ny, nx) nodal values.

    Returns:
        (ndarray): (ny-1, nx-1) cell values.
    """
    return 0.25 * (a[:-1, :-1] + a[:-1, 1:] + a[1:, :-1] + a[1:, 1:])


def _check_eps(eps):
    if not 0.0 < eps <= 1.0:
        logger.error(f"eps has to be in (0, 1], got {eps}.")
        raise ParameterError(f"eps must be in (0, 1], got {eps}")


def _check_v(v):
    vals = v.active_values()
    lo, hi = float(vals.min()), float(vals.max())
    if lo < -V_SLACK or hi > 1.0 + V_SLACK:
        logger.error(f"The phase field leaves [0, 1], min: {lo} max: {hi}.")
        raise DomainViolationError(f"v must lie in [0, 1], got range [{lo}, {hi}]")


def _surface_terms(v, eps, cells):
    domain = v.domain
    h2 = domain.h ** 2

    dvx, dvy = edge_diffs(v)
    grad_v = eps * h2 * float(cell_grad_sq(dvx, dvy, domain)[cells].sum())
    well = h2 * float(corner_mean((v.values - 1.0) ** 2)[cells].sum()) / (4.0 * eps)
    return grad_v, well


def at_energy(u, v, eps):
    """
    Ambrosio-Tortorelli energy by the cell midpoint rule.

    Args:
        u (obj): AngleField (principal value differences) or ScalarField lifting (plain differences).
        v (obj): ScalarField phase field with values in [0, 1].
        eps (float): Phase field width in (0, 1].

    Returns:
        (obj): EnergyReport.
    """
    _check_eps(eps)
    if u.domain != v.domain:
        raise ParameterError("u and v live on different domains")
    _check_v(v)

    domain = v.domain
    cells = domain.cell_mask

    bulk = domain.h ** 2 * float((corner_mean(v.values ** 2) * grad_sq(u))[cells].sum())
    grad_v, well = _surface_terms(v, eps, cells)

    total = bulk + grad_v + well
    logger.debug(f"energy: at_energy: eps: {eps} bulk: {bulk} grad_v: {grad_v} well: {well}")
    return EnergyReport(bulk=bulk, grad_v=grad_v, well=well, total=total, eps=eps)


def mm_energy(v, eps, cells=None):
    """
    Modica-Mortola part of the energy, eps |grad v|^2 + (v - 1)^2 / (4 eps).

    Args:
        v (obj): ScalarField phase field.
        eps (float): Phase field width in (0, 1].
        cells (ndarray): Optional boolean cell mask restricting the integral.

    Returns:
        (float): Energy value.
    """
    _check_eps(eps)
    _check_v(v)

    mask = v.domain.cell_mask
    if cells is not None:
        mask = mask & cells

    grad_v, well = _surface_terms(v, eps, mask)
    return grad_v + well


def ms_circle_value(u, jump_edges):
    """
    Mumford-Shah value of a circle-valued map: Dirichlet energy off the jump set plus its length.
    """
    value = dirichlet_energy(u, exclude=jump_edges) + jump_edges.length()
    logger.debug(f"energy: ms_circle_value: jumps: {len(jump_edges)} value: {value}")
    return value


def ms_lift_value(u, lifting_result, residual_tol=1e-9):
    """
    Mumford-Shah value with the surface term replaced by the jump length of a minimal lifting.

    Args:
        u (obj): AngleField.
        lifting_result (obj): LiftingResult from lifting.jump_min_lifting.
        residual_tol (float): Largest accepted |pv(phi - theta)|.

    Returns:
        (float): Energy value.
    """
    check_residual(u, lifting_result.phi, residual_tol)
    dirichlet = dirichlet_energy(u, exclude=lifting_result.fractional_edges)
    return dirichlet + lifting_result.jump_length
