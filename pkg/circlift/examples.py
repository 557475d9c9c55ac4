import logging

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from circlift.exceptions import ConfigError, ParameterError, ResolutionError
from circlift.grid import TWO_PI, AngleField, EdgeSet, ScalarField, distance_to_segments, pv_diff
from circlift.lifting import make_lifting
from circlift.solver import Regime
from circlift.utils import SCHEMA_VERSION

logger = logging.getLogger('circlift')

EXAMPLE_IDS = ('constant', 'vortex', 'perturbed-vortex', 'dipole')
DIPOLE_PLUS = (0.3, 0.0)
DIPOLE_MINUS = (-0.3, 0.0)
GSBV_BASE = 4


def _center(domain):
    return domain.shape_tag.center


def _check_off_nodes(domain, points):
    X, Y = domain.node_coords()
    for p in points:
        d = np.hypot(X - p[0], Y - p[1])[domain.mask]
        if d.size and d.min() < 1e-9 * domain.h:
            logger.error(f"The singular point {p} falls on a grid node, shift the grid or the point.")
            raise ConfigError(f"singular point {p} lies on an active node")


def constant_field(domain, angle=0.0):
    return AngleField(domain, np.full(domain.shape, float(angle)))


def vortex_field(domain, center=None):
    """
    The vortex map x / |x|, theta = atan2(y, x) around the center.

    Args:
        domain (obj): GridDomain, a disk by default centered at its middle.
        center (tuple): Optional vortex location.

    Returns:
        (obj): AngleField.
    """
    c = center if center is not None else _center(domain)
    _check_off_nodes(domain, [c])
    X, Y = domain.node_coords()
    return AngleField(domain, np.arctan2(Y - c[1], X - c[0]))


def _dipole_angles(X, Y, plus, minus):
    theta = np.zeros_like(X)
    for p in plus:
        theta += np.arctan2(Y - p[1], X - p[0])
    for m in minus:
        theta -= np.arctan2(Y - m[1], X - m[0])
    return theta


def dipole_field(domain, plus=(DIPOLE_PLUS,), minus=(DIPOLE_MINUS,)):
    """
    Product of vortices of degree +1 at every point of plus and -1 at every point of minus.

    Args:
        domain (obj): GridDomain.
        plus (list): Points of the positive vortices.
        minus (list): Points of the negative vortices.

    Returns:
        (obj): AngleField.
    """
    plus = [tuple(p) for p in plus]
    minus = [tuple(m) for m in minus]
    _check_off_nodes(domain, plus + minus)
    X, Y = domain.node_coords()
    return AngleField(domain, _dipole_angles(X, Y, plus, minus))


def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _perturbed_angles(X, Y, c, sigma):
    """
    chi_sigma(r) * theta with theta in [0, 2 pi) jumping on the positive x-axis.
    """
    dx, dy = X - c[0], Y - c[1]
    theta = np.mod(np.arctan2(dy, dx), TWO_PI)
    chi = smoothstep((np.hypot(dx, dy) - sigma / 4.0) / (sigma / 2.0))
    return chi * theta


def _axis_row(domain, c):
    """
    Row j such that the horizontal line through c runs strictly between node rows j and j + 1.
    """
    g = (c[1] - domain.y0) / domain.h
    j = int(np.floor(g))
    if abs(g - round(g)) < 1e-9:
        logger.error("The horizontal axis through the center runs along a node row.")
        raise ConfigError("center row lies on the grid, use an odd resolution")
    return j


def _axis_edges(domain, c, x_lo, x_hi):
    """
    y-edges crossing the horizontal axis through c with x - cx in (x_lo, x_hi).
    """
    j = _axis_row(domain, c)
    X, _ = domain.node_coords()
    _, ay = domain.edge_active()
    ey = np.zeros_like(ay)
    rel = X[j] - c[0]
    ey[j] = ay[j] & (rel > x_lo) & (rel < x_hi)
    return EdgeSet(domain, ey=ey)


def perturbed_vortex(domain, sigma):
    """
    The perturbed vortex u = exp(i chi_sigma theta). It agrees with the vortex outside radius
    3 sigma / 4, is constant inside sigma / 4, and jumps by a fraction of 2 pi on the
    segment (sigma / 4, 3 sigma / 4) x {0}.

    Args:
        domain (obj): Disk GridDomain.
        sigma (float): Cutoff scale in (0, 1).

    Returns:
        (tuple): u (AngleField), the reference lifting chi_sigma theta (ScalarField) and
            the fractional jump edges S_u (EdgeSet).
    """
    if domain.shape_tag.kind != 'disk':
        raise ConfigError("the perturbed vortex lives on a disk")
    if not 0.0 < sigma < 1.0:
        raise ParameterError(f"sigma must lie in (0, 1), got {sigma}")
    if not sigma / 4.0 > 4.0 * domain.h:
        logger.error(f"sigma {sigma} is too small for h {domain.h}, sigma / 4 has to exceed 4 h.")
        raise ResolutionError(f"sigma {sigma} isn't resolved by h {domain.h}")

    c = _center(domain)
    X, Y = domain.node_coords()
    ref = _perturbed_angles(X, Y, c, sigma)

    u = AngleField(domain, ref)
    su = _axis_edges(domain, c, sigma / 4.0, 3.0 * sigma / 4.0)
    logger.debug(f"examples: perturbed_vortex: sigma: {sigma} su edges: {len(su)}")
    return u, ScalarField(domain, ref), su


def perturbed_vortex_lifting(domain, sigma):
    """
    The reference lifting chi_sigma theta as a LiftingResult, jumping on (sigma / 4, 1) x {0}.
    """
    u, ref, su = perturbed_vortex(domain, sigma)
    jumps = _axis_edges(domain, _center(domain), sigma / 4.0, np.inf)
    return u, make_lifting(u, ref, jump_edges=jumps, fractional_edges=su)


def m2_expected(sigma):
    return 1.0 - sigma / 4.0


# Exact geometry of the GSBV construction. Columns tile (0, 1) in x, each holds a piecewise
# affine profile in y given as (y0, y1, value at y0, value at y1).

def _col_left(n):
    top = Fraction(1, n * n)
    pieces = [(Fraction(0), Fraction(1, 10 ** (n + 1)), (n + 1) ** 2, (n + 1) ** 2),
              (Fraction(1, 10 ** (n + 1)), top, (n + 1) ** 2, n * n),
              (top, top + Fraction(1, 10 ** n), n * n, n * n),
              (top + Fraction(1, 10 ** n), Fraction(1), GSBV_BASE, GSBV_BASE)]
    return Fraction(1, 2 ** (n + 1)), Fraction(1, 2 ** n), pieces


def _col_right(n):
    x0, x1 = Fraction(1, 2 ** n), Fraction(1, 2 ** (n - 1))
    if n == 2:
        return x0, x1, [(Fraction(0), Fraction(1), GSBV_BASE, GSBV_BASE)]

    top = Fraction(1, n * n)
    pieces = [(Fraction(0), Fraction(1, 10 ** (n - 1)), (n - 1) ** 2, (n - 1) ** 2),
              (Fraction(1, 10 ** (n - 1)), top, (n - 1) ** 2, n * n),
              (top, top + Fraction(1, 10 ** n), n * n, n * n),
              (top + Fraction(1, 10 ** n), Fraction(1), GSBV_BASE, GSBV_BASE)]
    return x0, x1, pieces


def _col_outer():
    return Fraction(1, 2), Fraction(1), [(Fraction(0), Fraction(1), GSBV_BASE, GSBV_BASE)]


def _interface_columns(k):
    """
    Columns left and right of the line x = 2^-k.
    """
    if k == 1:
        return _col_right(2), _col_outer()
    if k % 2 == 0:
        return _col_left(k), _col_right(k)
    return _col_right(k + 1), _col_left(k - 1)


def _eval(pieces, s, t):
    m = (s + t) / 2
    for y0, y1, a, b in pieces:
        if y0 <= m < y1:
            return (a + (b - a) * (s - y0) / (y1 - y0), a + (b - a) * (t - y0) / (y1 - y0))
    raise ValueError(f"no piece covers {m}")


def _interface_jump(left, right, lo, hi):
    """
    Length of the part of [lo, hi] where the two profiles differ, and the integral of |difference|.
    """
    cuts = {lo, hi}
    for pieces in (left[2], right[2]):
        cuts.update(y for p in pieces for y in p[:2] if lo < y < hi)
    ys = sorted(cuts)

    length, variation = Fraction(0), Fraction(0)
    for s, t in zip(ys, ys[1:]):
        la, lb = _eval(left[2], s, t)
        ra, rb = _eval(right[2], s, t)
        ds, dt = la - ra, lb - rb
        if ds == 0 and dt == 0:
            continue
        length += t - s
        if ds * dt >= 0:
            variation += (abs(ds) + abs(dt)) * (t - s) / 2
        else:
            r = s + (t - s) * abs(ds) / (abs(ds) + abs(dt))
            variation += (abs(ds) * (r - s) + abs(dt) * (t - r)) / 2
    return length, variation


def _horizontal_jumps(col):
    x0, x1, pieces = col
    length = Fraction(0)
    for prev, nxt in zip(pieces, pieces[1:]):
        if prev[3] != nxt[2]:
            length += x1 - x0
    return length


def _union(intervals):
    merged = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def gsbv_rates(n, p):
    """
    The model rates a_n = n^(3p-2) / 2^(n+1) and b_n = (n+1)^(3p-2) / 2^(n+2) of the gradient
    p-norms on the affine strips.
    """
    return n ** (3 * p - 2) / 2 ** (n + 1), (n + 1) ** (3 * p - 2) / 2 ** (n + 2)


def gsbv_levels(n_max):
    if n_max < 2 or n_max % 2:
        raise ParameterError(f"N_max must be an even integer >= 2, got {n_max}")
    return list(range(2, n_max + 1, 2))


def gsbv_jump_variation(n_max):
    """
    Integral of |[phi]| over the lateral edges of the affine strips up to level n_max, counting
    shared edges once.
    """
    edges = {}
    for n in gsbv_levels(n_max):
        v_range = (Fraction(1, 10 ** (n + 1)), Fraction(1, n * n))
        w_range = (Fraction(1, 10 ** (n + 1)), Fraction(1, (n + 2) ** 2))
        edges.setdefault(n + 1, []).append(v_range)
        edges.setdefault(n, []).append(v_range)
        edges.setdefault(n + 2, []).append(w_range)
        edges.setdefault(n + 1, []).append(w_range)

    total = Fraction(0)
    for k, intervals in edges.items():
        left, right = _interface_columns(k)
        for lo, hi in _union(intervals):
            total += _interface_jump(left, right, lo, hi)[1]
    return total


def gsbv_jump_length(n_max):
    """
    Length of the jump set on x >= 2^-(n_max+1), the part built by the levels up to n_max.
    """
    total = Fraction(0)
    for k in range(1, n_max + 2):
        left, right = _interface_columns(k)
        total += _interface_jump(left, right, Fraction(0), Fraction(1))[0]
    for n in gsbv_levels(n_max):
        total += _horizontal_jumps(_col_left(n)) + _horizontal_jumps(_col_right(n))
    return total


def gsbv_grad_norm(n_max, p):
    """
    Exact p-th power of the L^p norm of the gradient, the affine strips V_n and W_n up to n_max.
    """
    total = 0.0
    for n in gsbv_levels(n_max):
        for width, height, rise in ((Fraction(1, 2 ** (n + 1)), Fraction(1, n * n) - Fraction(1, 10 ** (n + 1)),
                                     2 * n + 1),
                                    (Fraction(1, 2 ** (n + 2)), Fraction(1, (n + 2) ** 2) - Fraction(1, 10 ** (n + 1)),
                                     2 * n + 3)):
            total += float(width * height) * float(rise / height) ** p
    return total


@dataclass
class GsbvSummary:
    N_max: int
    p: float
    partial_jump_variation: float
    partial_jump_length: float
    grad_p_norm: float
    harmonic_partial: float
    rate_partial: float
    grid_jump_length: float = 0.0

    @property
    def variation_ratio(self):
        return self.partial_jump_variation / self.harmonic_partial

    def to_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'N_max': self.N_max,
            'p': self.p,
            'partial_jump_variation': self.partial_jump_variation,
            'partial_jump_length': self.partial_jump_length,
            'grad_p_norm': self.grad_p_norm,
            'harmonic_partial': self.harmonic_partial,
            'rate_partial': self.rate_partial,
            'grid_jump_length': self.grid_jump_length,
        }


def gsbv_summary(n_max, p=2.0):
    """
    Analytic partial sums of the construction, independent of any grid.
    """
    levels = gsbv_levels(n_max)
    return GsbvSummary(
        N_max=n_max,
        p=p,
        partial_jump_variation=float(gsbv_jump_variation(n_max)),
        partial_jump_length=float(gsbv_jump_length(n_max)),
        grad_p_norm=gsbv_grad_norm(n_max, p),
        harmonic_partial=float(sum(Fraction(1, n) for n in levels)),
        rate_partial=float(sum(sum(gsbv_rates(n, p)) for n in levels)),
    )


def gsbv_resolvable(h):
    """
    Deepest even level whose narrowest strip, 2^-(n+2) wide, spans at least two cells.
    """
    n = 0
    while 2.0 ** -(n + 4) >= 2.0 * h:
        n += 2
    return n


def _paint_columns(level):
    cols = [_col_outer()]
    for n in gsbv_levels(level):
        cols += [_col_left(n), _col_right(n)]
    cols.append(_col_right(level + 2))
    tail_top = Fraction(1, (level + 2) ** 2)
    cols.append((Fraction(0), Fraction(1, 2 ** (level + 2)),
                 [(Fraction(0), tail_top, (level + 1) ** 2, (level + 1) ** 2),
                  (tail_top, Fraction(1), GSBV_BASE, GSBV_BASE)]))
    return cols


def gsbv_example(domain, n_max, p=2.0, strict=False):
    """
    The lifting of the GSBV-but-not-SBV construction on the unit square, painted on the grid up
    to the deepest level the grid resolves, with its analytic summary at level n_max.

    Args:
        domain (obj): GridDomain of the unit square.
        n_max (int): Even truncation level.
        p (float): Exponent of the gradient norm.
        strict (bool): Raise when the grid can't resolve n_max instead of painting fewer levels.

    Returns:
        (tuple): phi (ScalarField) and GsbvSummary.
    """
    tag = domain.shape_tag
    if tag.kind not in ('square', 'rect') or tag.bbox != (0.0, 0.0, 1.0, 1.0):
        raise ConfigError("the GSBV example lives on the unit square")

    summary = gsbv_summary(n_max, p)
    level = gsbv_resolvable(domain.h)
    if level < 2:
        raise ResolutionError(f"h {domain.h} doesn't resolve the first level of the construction")
    if n_max > level:
        if strict:
            raise ResolutionError(f"N_max {n_max} isn't resolvable at h {domain.h}, the grid stops at {level}")
        logger.warning(f"N_max {n_max} isn't resolvable at h {domain.h}, painting levels up to {level}.")
    level = min(level, n_max)

    X, Y = domain.node_coords()
    vals = np.full(domain.shape, float(GSBV_BASE))
    steepest = 0.0
    for x0, x1, pieces in _paint_columns(level):
        in_col = (X >= float(x0)) & (X < float(x1))
        for y0, y1, a, b in pieces:
            sel = in_col & (Y >= float(y0)) & (Y < float(y1))
            slope = float((b - a) / (y1 - y0))
            vals[sel] = float(a) + slope * (Y[sel] - float(y0))
            steepest = max(steepest, abs(slope))

    phi = ScalarField(domain, vals)

    # Openings above the steepest affine increment per edge can only come from jumps.
    ax, ay = domain.edge_active()
    floor = 1.5 * steepest * domain.h
    dx, dy = np.diff(phi.values, axis=1), np.diff(phi.values, axis=0)
    summary.grid_jump_length = EdgeSet(domain, ax & (np.abs(dx) > floor), ay & (np.abs(dy) > floor)).length()

    logger.debug(f"examples: gsbv_example: n_max: {n_max} painted: {level} summary: {summary}")
    return phi, summary


@dataclass
class RecoveryGeometry:
    angle: object
    lift: object
    su: list
    sphi: list


def _recovery_geometry(example_id, domain, sigma):
    c = _center(domain)
    if example_id == 'constant':
        return RecoveryGeometry(lambda x, y: np.zeros_like(x), lambda x, y: np.zeros_like(x), [], [])

    if example_id == 'vortex':
        r = domain.shape_tag.params[2] if domain.shape_tag.kind == 'disk' else domain.shape_tag.boundary_distance(c)

        def lift(x, y):
            return np.mod(np.arctan2(y - c[1], x - c[0]), TWO_PI)
        return RecoveryGeometry(lift, lift, [], [(c, (c[0] + r, c[1]))])

    if example_id == 'perturbed-vortex':
        if domain.shape_tag.kind != 'disk':
            raise ConfigError("the perturbed vortex lives on a disk")
        r = domain.shape_tag.params[2]

        def lift(x, y):
            return _perturbed_angles(x, y, c, sigma)
        su = [((c[0] + sigma / 4.0, c[1]), (c[0] + 3.0 * sigma / 4.0, c[1]))]
        sphi = [((c[0] + sigma / 4.0, c[1]), (c[0] + r, c[1]))]
        return RecoveryGeometry(lift, lift, su, sphi)

    if example_id == 'dipole':
        p, m = DIPOLE_PLUS, DIPOLE_MINUS

        def angle(x, y):
            return _dipole_angles(x, y, [p], [m])

        def lift(x, y):
            z = ((x - p[0]) + 1j * (y - p[1])) / ((x - m[0]) + 1j * (y - m[1]))
            return np.angle(z)
        return RecoveryGeometry(angle, lift, [], [(m, p)])

    raise ParameterError(f"unknown example {example_id}, use one of {', '.join(EXAMPLE_IDS)}")


def _tube_blend(domain, segs, xi, fn, circular):
    """
    Values of fn off the xi-tube around the segments, across the tube a blend of the values
    sampled at +- xi along the segment normal.
    """
    X, Y = domain.node_coords()
    vals = fn(X, Y)
    if not segs:
        return vals

    dist = np.full(domain.shape, np.inf)
    foot_x, foot_y = np.zeros(domain.shape), np.zeros(domain.shape)
    nrm_x, nrm_y = np.zeros(domain.shape), np.zeros(domain.shape)
    for p, q in segs:
        vx, vy = q[0] - p[0], q[1] - p[1]
        length = float(np.hypot(vx, vy))
        t = np.clip(((X - p[0]) * vx + (Y - p[1]) * vy) / (length * length), 0.0, 1.0)
        fx, fy = p[0] + t * vx, p[1] + t * vy
        d = np.hypot(X - fx, Y - fy)
        closer = d < dist
        dist = np.where(closer, d, dist)
        foot_x, foot_y = np.where(closer, fx, foot_x), np.where(closer, fy, foot_y)
        nrm_x, nrm_y = np.where(closer, -vy / length, nrm_x), np.where(closer, vx / length, nrm_y)

    tube = domain.mask & (dist <= xi)
    fx, fy, nx_, ny_ = foot_x[tube], foot_y[tube], nrm_x[tube], nrm_y[tube]
    below = fn(fx - xi * nx_, fy - xi * ny_)
    above = fn(fx + xi * nx_, fy + xi * ny_)
    offset = (X[tube] - fx) * nx_ + (Y[tube] - fy) * ny_
    t = np.clip((offset + xi) / (2.0 * xi), 0.0, 1.0)

    if circular:
        vals[tube] = below + t * pv_diff(above, below)
    else:
        vals[tube] = below + t * (above - below)
    return vals


def recovery_pair(example_id, eps, xi, regime, domain, sigma=0.4):
    """
    Recovery sequence element for an example: v vanishes on the xi-tube around the jump set
    and recovers as 1 - exp(-(d - xi) / (2 eps)) outside it. In the relaxed regime the tube
    follows S_u and u is blended along the shortest arc across it, in the constrained regime
    it follows the jump set of the minimal lifting, which is blended affinely so u stays
    single valued.

    Args:
        example_id (str): One of constant, vortex, perturbed-vortex, dipole.
        eps (float): Phase field width.
        xi (float): Tube radius, below eps.
        regime (obj): Regime, or its name.
        domain (obj): GridDomain.
        sigma (float): Cutoff of the perturbed vortex.

    Returns:
        (tuple): u_eps (AngleField) and v_eps (ScalarField).
    """
    if not isinstance(regime, Regime):
        regime = Regime.parse(regime)
    if not 0.0 < eps <= 1.0:
        raise ParameterError(f"eps must be in (0, 1], got {eps}")
    if not 0.0 < xi < eps:
        logger.error(f"The tube radius xi {xi} has to be positive and below eps {eps}.")
        raise ParameterError(f"xi must lie in (0, eps), got xi={xi} eps={eps}")
    if xi >= eps / 4.0:
        logger.warning(f"xi {xi} isn't small against eps {eps}, the surface term carries an O(xi / eps) excess.")
    if xi < domain.h:
        logger.warning(f"xi {xi} is below the grid spacing {domain.h}, the tube isn't resolved.")

    geo = _recovery_geometry(example_id, domain, sigma)
    relaxed = regime is Regime.RELAXED
    segs = geo.su if relaxed else geo.sphi

    if segs:
        d = distance_to_segments(domain, segs).values
        v = np.where(d <= xi, 0.0, 1.0 - np.exp(-(d - xi) / (2.0 * eps)))
    else:
        v = np.ones(domain.shape)

    vals = _tube_blend(domain, segs, xi, geo.angle if relaxed else geo.lift, circular=relaxed)
    logger.debug(f"examples: recovery_pair: {example_id} {regime.value} eps: {eps} xi: {xi} segments: {len(segs)}")
    return AngleField(domain, vals), ScalarField(domain, np.clip(v, 0.0, 1.0))


def recovery_jump_length(example_id, regime, domain, sigma=0.4):
    """
    Length of the set the recovery tube follows, the limit of the surface term.
    """
    if not isinstance(regime, Regime):
        regime = Regime.parse(regime)
    geo = _recovery_geometry(example_id, domain, sigma)
    segs = geo.su if regime is Regime.RELAXED else geo.sphi
    return float(sum(np.hypot(q[0] - p[0], q[1] - p[1]) for p, q in segs))


def recovery_surface_prediction(length, caps, eps, xi):
    """
    Finite eps Modica-Mortola value of the exponential profile around a segment: 1 per unit
    length, xi / (2 eps) from the well inside the tube, and a half annulus at every interior
    endpoint.

    Args:
        length (float): Total length of the segments.
        caps (int): Number of segment endpoints inside the domain.
        eps (float): Phase field width.
        xi (float): Tube radius.

    Returns:
        (float): Predicted surface energy.
    """
    return length * (1.0 + xi / (2.0 * eps)) + caps * (0.5 * np.pi * (eps + xi) + np.pi * xi * xi / (8.0 * eps))
