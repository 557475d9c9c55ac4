import logging

from dataclasses import dataclass

import numpy as np

from scipy import ndimage, sparse
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.sparse.linalg import spsolve

from circlift.exceptions import InconsistentCutsError, InvalidLiftingError, ParameterError
from circlift.grid import TWO_PI, EdgeSet, ScalarField, edge_diffs, edge_laplacian, pv_diff
from circlift.transport import BOUNDARY_TOL, ChargeConfig, Connection, minimal_connection
from circlift.utils import SCHEMA_VERSION

logger = logging.getLogger('circlift')

RESIDUAL_TOL = 1e-9
CONSISTENCY_TOL = 1e-9
INTEGER_TOL = 1e-6


@dataclass(frozen=True)
class Charge:
    point: tuple
    q: int
    cell: tuple


class VortexSet(object):
    def __init__(self, charges=None):
        """
        Nonzero plaquette windings of an angle field.

        Args:
            charges (list): Charge entries, plaquette center, integer charge and cell index.
        """
        self.charges = list(charges or [])

    def __len__(self):
        return len(self.charges)

    def __iter__(self):
        return iter(self.charges)

    def __repr__(self):
        return f"VortexSet({[(c.point, c.q) for c in self.charges]})"

    @property
    def degree(self):
        return sum(c.q for c in self.charges)

    def atoms(self):
        """
        Split the charges into unit atoms, a charge q contributes |q| copies of its point.

        Returns:
            (tuple): Lists of positive and negative atom points.
        """
        pos, neg = [], []
        for c in self.charges:
            (pos if c.q > 0 else neg).extend([c.point] * abs(c.q))
        return pos, neg

    def to_charge_config(self, domain):
        pos, neg = self.atoms()
        return ChargeConfig(pos, neg, domain)

    def to_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'degree': self.degree,
            'charges': [{'point': list(c.point), 'q': c.q, 'cell': list(c.cell)} for c in self.charges],
        }


@dataclass
class LiftingResult:
    """
    A lifting phi of an angle field with the jump set it was built with.
    """
    phi: ScalarField
    jump_edges: EdgeSet
    max_residual: float
    fractional_edges: EdgeSet = None
    connection: Connection = None

    def __post_init__(self):
        if self.fractional_edges is None:
            self.fractional_edges = EdgeSet(self.phi.domain)
        if self.connection is None:
            self.connection = Connection()

    @property
    def jump_length(self):
        return self.jump_edges.length()

    @property
    def fractional_length(self):
        return (self.jump_edges & self.fractional_edges).length()

    @property
    def integer_length(self):
        return self.jump_length - self.fractional_length

    @property
    def n_jump_edges(self):
        return len(self.jump_edges)

    def to_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'jump_length': self.jump_length,
            'fractional_length': self.fractional_length,
            'integer_length': self.integer_length,
            'max_residual': self.max_residual,
            'n_jump_edges': self.n_jump_edges,
        }


@dataclass
class DavilaIgnatReport:
    phi_bv: float
    u_bv: float
    ratio: float
    linf: float
    passed: bool

    def to_dict(self):
        return {'schema_version': SCHEMA_VERSION, 'phi_bv': self.phi_bv, 'u_bv': self.u_bv,
                'ratio': self.ratio, 'linf': self.linf, 'passed': self.passed}


def check_residual(u, phi, tol=RESIDUAL_TOL):
    """
    Largest |pv(phi - theta)| over the active nodes.

    Args:
        u (obj): AngleField.
        phi (obj): ScalarField candidate lifting.
        tol (float): Accepted residual.

    Returns:
        (float): The residual.
    """
    if phi.domain != u.domain:
        raise ParameterError("lifting and angle field live on different domains")

    res = np.abs(pv_diff(phi.values, u.theta))[u.domain.mask]
    max_res = float(res.max()) if res.size else 0.0
    if not max_res < tol:
        logger.error(f"The lifting doesn't reproduce the angle field, residual: {max_res}")
        raise InvalidLiftingError(f"lifting residual {max_res} exceeds {tol}")
    return max_res


def winding_of_loop(u, loop):
    """
    Degree of u along a closed 4-connected node cycle.

    Args:
        u (obj): AngleField.
        loop (list): (j, i) nodes in order, the closing node may be repeated.

    Returns:
        (int): Winding number.
    """
    nodes = [tuple(int(c) for c in n) for n in loop]
    if len(nodes) > 1 and nodes[0] == nodes[-1]:
        nodes = nodes[:-1]
    if len(nodes) < 4:
        raise ParameterError("a closed grid loop has at least 4 nodes")

    mask = u.domain.mask
    total = 0.0
    for a, b in zip(nodes, nodes[1:] + nodes[:1]):
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
            raise ParameterError(f"loop step {a} -> {b} isn't between 4-neighbours")
        for n in (a, b):
            if not (0 <= n[0] < u.domain.ny and 0 <= n[1] < u.domain.nx) or not mask[n]:
                raise ParameterError(f"loop touches the inactive node {n}")
        total += pv_diff(u.theta[b], u.theta[a])

    return int(round(total / TWO_PI))


def rectangle_loop(j0, i0, j1, i1):
    """
    Counter-clockwise node cycle around the rectangle of nodes [j0, j1] x [i0, i1].
    """
    loop = [(j0, i) for i in range(i0, i1 + 1)]
    loop += [(j, i1) for j in range(j0 + 1, j1 + 1)]
    loop += [(j1, i) for i in range(i1 - 1, i0 - 1, -1)]
    loop += [(j, i0) for j in range(j1 - 1, j0, -1)]
    return loop


def plaquette_charges(u):
    """
    Winding of u around every interior plaquette, counter-clockwise.

    Returns:
        (ndarray): (ny-1, nx-1) integer array.
    """
    t = u.theta
    w = (pv_diff(t[:-1, 1:], t[:-1, :-1]) + pv_diff(t[1:, 1:], t[:-1, 1:])
         + pv_diff(t[1:, :-1], t[1:, 1:]) + pv_diff(t[:-1, :-1], t[1:, :-1]))
    q = np.rint(w / TWO_PI).astype(int)
    q[~u.domain.cell_mask] = 0
    return q


def detect_vortices(u):
    """
    Discrete Jacobian of u as a list of plaquette charges.

    Args:
        u (obj): AngleField.

    Returns:
        (obj): VortexSet.
    """
    q = plaquette_charges(u)
    charges = []
    for j, i in zip(*np.nonzero(q)):
        charges.append(Charge(point=u.domain.cell_center(int(j), int(i)), q=int(q[j, i]), cell=(int(j), int(i))))

    logger.debug(f"lifting: detect_vortices: charges: {len(charges)} degree: {int(q.sum())}")
    return VortexSet(charges)


def _adjacency(domain, keep_x, keep_y):
    ny, nx = domain.shape
    idx = np.arange(nx * ny).reshape(ny, nx)
    a = np.concatenate([idx[:, :-1][keep_x], idx[:-1, :][keep_y]])
    b = np.concatenate([idx[:, 1:][keep_x], idx[1:, :][keep_y]])
    return sparse.coo_matrix((np.ones(a.size), (a, b)), shape=(nx * ny, nx * ny)).tocsr()


def unwrap(u, cut_edges, residual_tol=RESIDUAL_TOL):
    """
    Integrate the principal value increments of u along a breadth first spanning forest
    of the grid graph with the cut edges removed.

    Args:
        u (obj): AngleField.
        cut_edges (obj): EdgeSet the integration may not cross.
        residual_tol (float): Accepted lifting residual.

    Returns:
        (obj): LiftingResult.
    """
    domain = u.domain
    if cut_edges.domain != domain:
        raise ParameterError("cut edges live on a different domain")

    ny, nx = domain.shape
    n = nx * ny
    ax, ay = domain.edge_active()
    keep_x = ax & ~cut_edges.ex
    keep_y = ay & ~cut_edges.ey

    graph = _adjacency(domain, keep_x, keep_y)
    _, labels = connected_components(graph, directed=False)

    theta = u.theta.ravel()
    active = np.flatnonzero(domain.mask.ravel())
    _, first = np.unique(labels[active], return_index=True)
    roots = active[first]

    vals = [0.0] * n
    for root in roots:
        order, pred = breadth_first_order(graph, root, directed=False, return_predecessors=True)
        kids = order[1:]
        inc = np.atleast_1d(pv_diff(theta[kids], theta[pred[kids]]))
        vals[root] = pv_diff(theta[root], 0.0)
        for k, p, d in zip(kids.tolist(), pred[kids].tolist(), inc.tolist()):
            vals[k] = vals[p] + d

    logger.debug(f"lifting: unwrap: cuts: {len(cut_edges)} components: {len(roots)}")

    phi = np.array(vals).reshape(ny, nx)
    dphi_x, dphi_y = phi[:, 1:] - phi[:, :-1], phi[1:, :] - phi[:-1, :]
    dth_x, dth_y = edge_diffs(u)

    for axis, dphi, dth, keep in (('x', dphi_x, dth_x, keep_x), ('y', dphi_y, dth_y, keep_y)):
        bad = keep & (np.abs(dphi - dth) > CONSISTENCY_TOL)
        if bad.any():
            j, i = (int(c[0]) for c in np.nonzero(bad))
            edge = (axis, j, i)
            logger.error(f"The cuts leave a charge uncancelled, unwrapping is inconsistent across edge {edge}.")
            raise InconsistentCutsError(f"inconsistent cuts at edge {edge}", edge=edge)

    phi_field = ScalarField(domain, phi)
    max_res = check_residual(u, phi_field, residual_tol)

    big = EdgeSet(domain, ax & (np.abs(dphi_x) > np.pi), ay & (np.abs(dphi_y) > np.pi))
    return LiftingResult(phi=phi_field, jump_edges=cut_edges | big, max_residual=max_res)


def rasterize_segment(domain, p, q, to_boundary=False):
    """
    Primal edges crossed by a segment, found by walking the plaquettes it passes through.
    The crossed edges form a connected staircase of dual edges.

    Args:
        domain (obj): GridDomain.
        p (tuple): Start point, inside the domain.
        q (tuple): End point.
        to_boundary (bool): q lies on the boundary, keep walking past it until the walk leaves the interior cells.

    Returns:
        (obj): EdgeSet.
    """
    ny, nx = domain.shape
    h = domain.h
    ax, ay = domain.edge_active()
    cells = domain.cell_mask
    ex = np.zeros_like(ax)
    ey = np.zeros_like(ay)

    if to_boundary:
        d = np.subtract(q, p)
        norm = float(np.hypot(*d))
        if norm > 0.0:
            q = tuple(np.add(q, 3.0 * h * d / norm))

    gx0, gy0 = (p[0] - domain.x0) / h, (p[1] - domain.y0) / h
    dx, dy = (q[0] - p[0]) / h, (q[1] - p[1]) / h
    i, j = int(np.floor(gx0)), int(np.floor(gy0))

    step_i = 1 if dx > 0 else -1
    step_j = 1 if dy > 0 else -1
    t_max_x = ((i + (dx > 0)) - gx0) / dx if dx != 0 else np.inf
    t_max_y = ((j + (dy > 0)) - gy0) / dy if dy != 0 else np.inf
    t_dx = abs(1.0 / dx) if dx != 0 else np.inf
    t_dy = abs(1.0 / dy) if dy != 0 else np.inf

    while True:
        if t_max_x <= t_max_y:
            if t_max_x > 1.0:
                break
            col = i + (1 if step_i > 0 else 0)
            if 0 <= j < ny - 1 and 0 <= col < nx and ay[j, col]:
                ey[j, col] = True
            i += step_i
            t_max_x += t_dx
        else:
            if t_max_y > 1.0:
                break
            row = j + (1 if step_j > 0 else 0)
            if 0 <= row < ny and 0 <= i < nx - 1 and ax[row, i]:
                ex[row, i] = True
            j += step_j
            t_max_y += t_dy

        if to_boundary and not (0 <= j < ny - 1 and 0 <= i < nx - 1 and cells[j, i]):
            break

    return EdgeSet(domain, ex, ey)


def rasterize_connection(domain, conn):
    """
    Cut edges of every segment of a connection, segments ending on the boundary are
    walked from their interior end outwards.
    """
    cuts = EdgeSet(domain)
    shape = domain.shape_tag
    for s in conn.segments:
        if abs(shape.boundary_distance(s.q)) <= BOUNDARY_TOL:
            cuts = cuts | rasterize_segment(domain, s.p, s.q, to_boundary=True)
        elif abs(shape.boundary_distance(s.p)) <= BOUNDARY_TOL:
            cuts = cuts | rasterize_segment(domain, s.q, s.p, to_boundary=True)
        else:
            cuts = cuts | rasterize_segment(domain, s.p, s.q)
    return cuts


def jump_min_lifting(u, declared_su=None, max_charges=8, residual_tol=RESIDUAL_TOL):
    """
    Jump minimizing lifting: detect the vortices, connect them minimally, cut along the
    rasterized connection and the declared fractional jumps, then unwrap.

    Args:
        u (obj): AngleField.
        declared_su (obj): EdgeSet where u itself jumps, None for a Sobolev regular u.
        max_charges (int): Budget of the minimal connection search.
        residual_tol (float): Accepted lifting residual.

    Returns:
        (obj): LiftingResult.
    """
    domain = u.domain
    declared = declared_su if declared_su is not None else EdgeSet(domain)

    vortices = detect_vortices(u)
    conn = Connection()
    if len(vortices):
        conn = minimal_connection(vortices.to_charge_config(domain), max_charges=max_charges)

    cuts = rasterize_connection(domain, conn) | declared
    result = unwrap(u, cuts, residual_tol)
    result.fractional_edges = declared
    result.connection = conn

    logger.debug(f"lifting: jump_min_lifting: charges: {len(vortices)} connection: {conn.total_length} "
                 f"jump_length: {result.jump_length}")
    return result


def make_lifting(u, phi, jump_edges=None, fractional_edges=None, residual_tol=RESIDUAL_TOL):
    """
    Wrap a known lifting, by default its jump set is every edge with |delta phi| > pi.
    """
    max_res = check_residual(u, phi, residual_tol)
    if jump_edges is None:
        ax, ay = phi.domain.edge_active()
        dx, dy = edge_diffs(phi)
        jump_edges = EdgeSet(phi.domain, ax & (np.abs(dx) > np.pi), ay & (np.abs(dy) > np.pi))
    return LiftingResult(phi=phi, jump_edges=jump_edges, max_residual=max_res, fractional_edges=fractional_edges)


def _smooth_increments(u, result):
    """
    Increment of the smooth part of u across every edge. Across a declared fractional
    edge it is the mean over the parallel neighbour edges that don't jump.
    """
    ax, ay = u.domain.edge_active()
    dth_x, dth_y = edge_diffs(u)
    smooth_x, smooth_y = dth_x.copy(), dth_y.copy()
    jumps = result.jump_edges

    for axis, j, i in result.fractional_edges:
        if axis == 'x':
            act, dth, out, near = ax, dth_x, smooth_x, [(j, i - 1), (j, i + 1)]
        else:
            act, dth, out, near = ay, dth_y, smooth_y, [(j - 1, i), (j + 1, i)]

        vals = [dth[e] for e in near if 0 <= e[0] < act.shape[0] and 0 <= e[1] < act.shape[1]
                and act[e] and (axis,) + e not in jumps]
        out[j, i] = float(np.mean(vals)) if vals else 0.0

    return smooth_x, smooth_y


def classify_jumps(result, u, integer_tol=INTEGER_TOL):
    """
    Split the jump set by opening: integer edges jump by a nonzero multiple of 2 pi once the
    smooth increment of u is removed, fractional edges by anything else. Cut edges across
    which phi doesn't actually jump belong to neither.

    Args:
        result (obj): LiftingResult.
        u (obj): AngleField.
        integer_tol (float): Distance to 2 pi Z below which an opening counts as integer.

    Returns:
        (tuple): EdgeSets (S_f, S_I).
    """
    check_residual(u, result.phi)

    domain = u.domain
    dphi_x, dphi_y = edge_diffs(result.phi)
    smooth_x, smooth_y = _smooth_increments(u, result)

    masks = []
    for dphi, smooth, jumps in ((dphi_x, smooth_x, result.jump_edges.ex), (dphi_y, smooth_y, result.jump_edges.ey)):
        opening = dphi - smooth
        k = np.rint(opening / TWO_PI)
        integer = (k != 0) & (np.abs(opening - TWO_PI * k) < integer_tol)
        fractional = ~integer & (np.abs(opening) >= integer_tol)
        masks.append((jumps & fractional, jumps & integer))

    s_f = EdgeSet(domain, masks[0][0], masks[1][0])
    s_i = EdgeSet(domain, masks[0][1], masks[1][1])
    logger.debug(f"lifting: classify_jumps: fractional: {s_f.length()} integer: {s_i.length()}")
    return s_f, s_i


def detect_fractional_jumps(u, threshold=np.pi / 2):
    """
    Diagnostic only: edges where the principal value increment exceeds the threshold.
    """
    ax, ay = u.domain.edge_active()
    dx, dy = edge_diffs(u)
    return EdgeSet(u.domain, ax & (np.abs(dx) > threshold), ay & (np.abs(dy) > threshold))


def smooth_lifting(result, band=1):
    """
    Replace phi by the discrete harmonic interpolant on a band of nodes around the jump set,
    the values off the band are kept. The result is single valued and no longer a lifting.

    Args:
        result (obj): LiftingResult.
        band (int): Number of node layers added on each side of the jump edge endpoints.

    Returns:
        (obj): ScalarField.
    """
    phi = result.phi
    domain = phi.domain
    jumps = result.jump_edges

    near = np.zeros(domain.shape, dtype=bool)
    near[:, :-1] |= jumps.ex
    near[:, 1:] |= jumps.ex
    near[:-1, :] |= jumps.ey
    near[1:, :] |= jumps.ey
    if band > 0 and near.any():
        near = ndimage.binary_dilation(near, iterations=band)
    free = near & domain.mask
    fixed = domain.mask & ~free

    if not free.any() or not fixed.any():
        return ScalarField(domain, phi.values)

    ax, ay = domain.edge_active()
    lap = edge_laplacian(domain, ax.astype(float), ay.astype(float))
    f_idx = np.flatnonzero(free.ravel())
    c_idx = np.flatnonzero(fixed.ravel())
    vals = phi.values.ravel().copy()

    rhs = -lap[f_idx][:, c_idx] @ vals[c_idx]
    vals[f_idx] = spsolve(lap[f_idx][:, f_idx].tocsc(), rhs)

    logger.debug(f"lifting: smooth_lifting: band nodes: {f_idx.size}")
    return ScalarField(domain, vals.reshape(domain.shape))


def _total_variation(dx, dy, domain):
    wx, wy = domain.edge_weights()
    return domain.h * float((wx * np.abs(dx)).sum() + (wy * np.abs(dy)).sum())


def bounded_lifting(u, levels=64, residual_tol=RESIDUAL_TOL):
    """
    Lifting with values in [t - 2 pi, t) for the branch level t of least total variation.
    Averaging over t bounds the variation by twice that of u, so the best level does too.

    Args:
        u (obj): AngleField.
        levels (int): Number of equally spaced branch levels tried.

    Returns:
        (obj): LiftingResult.
    """
    best = None
    for t in np.linspace(0.0, TWO_PI, int(levels), endpoint=False):
        vals = np.mod(u.theta - t, TWO_PI) + t - TWO_PI
        cand = ScalarField(u.domain, vals)
        bv = _total_variation(*edge_diffs(cand), u.domain)
        if best is None or bv < best[0]:
            best = (bv, cand, t)

    bv, phi, t = best
    logger.debug(f"lifting: bounded_lifting: level: {t} bv: {bv}")
    return make_lifting(u, phi, residual_tol=residual_tol)


def davila_ignat_check(u, phi, bound=2.2, residual_tol=RESIDUAL_TOL):
    """
    Compare the total variation of a lifting with the chordal variation of u.

    Args:
        u (obj): AngleField.
        phi (obj): ScalarField lifting of u.
        bound (float): Largest ratio reported as a pass.

    Returns:
        (obj): DavilaIgnatReport.
    """
    check_residual(u, phi, residual_tol)
    domain = u.domain

    phi_bv = _total_variation(*edge_diffs(phi), domain)
    dth_x, dth_y = edge_diffs(u)
    u_bv = _total_variation(2.0 * np.sin(dth_x / 2.0), 2.0 * np.sin(dth_y / 2.0), domain)

    if u_bv > 0.0:
        ratio = phi_bv / u_bv
    else:
        ratio = 0.0 if phi_bv == 0.0 else np.inf

    linf = float(np.abs(phi.active_values()).max())
    report = DavilaIgnatReport(phi_bv=phi_bv, u_bv=u_bv, ratio=ratio, linf=linf, passed=bool(ratio <= bound))
    logger.debug(f"lifting: davila_ignat_check: {report}")
    return report
