import logging
import re

import numpy as np

from scipy import ndimage, sparse

from circlift.exceptions import ConfigError, ParameterError

logger = logging.getLogger('circlift')

TWO_PI = 2.0 * np.pi


class ShapeTag(object):
    KINDS = {'disk': 3, 'square': 1, 'rect': 2}

    def __init__(self, kind, params):
        """
        Geometry of the continuous domain a grid approximates.

        Args:
            kind (str): One of disk, square or rect.
            params (tuple): (cx, cy, r) for a disk, (side,) for a square, (w, h) for a rect.
        """
        if kind not in self.KINDS:
            logger.error(f"Unsupported shape {kind}, please use one of disk, square, rect.")
            raise ConfigError(f"unsupported shape {kind}")

        params = tuple(float(p) for p in params)
        if len(params) != self.KINDS[kind]:
            raise ConfigError(f"shape {kind} takes {self.KINDS[kind]} parameters, got {len(params)}")

        sizes = params[2:] if kind == 'disk' else params
        if not all(np.isfinite(params)) or any(s <= 0 for s in sizes):
            raise ConfigError(f"shape parameters must be positive: {kind}{params}")

        self.kind = kind
        self.params = params

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0):
        return cls('disk', (center[0], center[1], radius))

    @classmethod
    def square(cls, side=1.0):
        return cls('square', (side,))

    @classmethod
    def rect(cls, width, height):
        return cls('rect', (width, height))

    @classmethod
    def parse(cls, text):
        """
        Parse the serialized form, ex. disk(0,0,1).

        Args:
            text (str): Shape tag string.

        Returns:
            (obj): ShapeTag.
        """
        m = re.fullmatch(r"\s*(\w+)\(([^)]*)\)\s*", text)
        if not m:
            raise ConfigError(f"can't parse shape tag {text!r}")
        try:
            params = [float(p) for p in m.group(2).split(',') if p.strip()]
        except ValueError:
            raise ConfigError(f"can't parse shape tag {text!r}")
        return cls(m.group(1), params)

    def __str__(self):
        return f"{self.kind}({','.join('%.17g' % p for p in self.params)})"

    def __repr__(self):
        return f"ShapeTag({self})"

    def __eq__(self, other):
        return isinstance(other, ShapeTag) and self.kind == other.kind and self.params == other.params

    def __hash__(self):
        return hash((self.kind, self.params))

    @property
    def bbox(self):
        if self.kind == 'disk':
            cx, cy, r = self.params
            return cx - r, cy - r, cx + r, cy + r
        if self.kind == 'square':
            return 0.0, 0.0, self.params[0], self.params[0]
        return 0.0, 0.0, self.params[0], self.params[1]

    @property
    def center(self):
        xmin, ymin, xmax, ymax = self.bbox
        return 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)

    def contains(self, x, y):
        """
        Disks are open, squares and rects closed so their boundary nodes stay active.
        """
        if self.kind == 'disk':
            cx, cy, r = self.params
            return (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2 < r * r

        xmin, ymin, xmax, ymax = self.bbox
        tol = 1e-9 * max(xmax - xmin, ymax - ymin)
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= xmin - tol) & (x <= xmax + tol) & (y >= ymin - tol) & (y <= ymax + tol)

    def boundary_distance(self, p):
        """
        Distance from an interior point to the boundary of the shape.
        """
        if self.kind == 'disk':
            cx, cy, r = self.params
            return r - float(np.hypot(p[0] - cx, p[1] - cy))

        xmin, ymin, xmax, ymax = self.bbox
        return float(min(p[0] - xmin, xmax - p[0], p[1] - ymin, ymax - p[1]))

    def nearest_boundary_point(self, p):
        """
        Closest point of the boundary to p.

        Args:
            p (tuple): Interior point.

        Returns:
            (tuple): Boundary point.
        """
        if self.kind == 'disk':
            cx, cy, r = self.params
            dx, dy = p[0] - cx, p[1] - cy
            n = float(np.hypot(dx, dy))
            if n == 0.0:
                return cx + r, cy
            return cx + r * dx / n, cy + r * dy / n

        xmin, ymin, xmax, ymax = self.bbox
        options = [(p[0] - xmin, (xmin, p[1])), (xmax - p[0], (xmax, p[1])),
                   (p[1] - ymin, (p[0], ymin)), (ymax - p[1], (p[0], ymax))]
        return min(options, key=lambda o: o[0])[1]


class GridDomain(object):
    def __init__(self, nx, ny, h, mask, shape_tag, origin):
        """
        Masked rectangular lattice, node (j, i) sits at (x0 + i*h, y0 + j*h).

        Args:
            nx (int): Node count along x.
            ny (int): Node count along y.
            h (float): Grid spacing.
            mask (ndarray): Boolean (ny, nx) array, True for nodes inside the domain.
            shape_tag (obj): ShapeTag the grid approximates.
            origin (tuple): Coordinates of node (0, 0).
        """
        if nx < 1 or ny < 1 or not h > 0:
            raise ConfigError(f"invalid grid nx={nx} ny={ny} h={h}")

        mask = np.array(mask, dtype=bool)
        if mask.shape != (ny, nx):
            raise ConfigError(f"mask shape {mask.shape} doesn't match grid ({ny}, {nx})")

        if not mask.any():
            logger.error("The domain has no active nodes.")
            raise ConfigError("empty active set")

        # The default structuring element of label is the 4-neighbourhood.
        _, n_comp = ndimage.label(mask)
        if n_comp != 1:
            logger.error(f"The active nodes form {n_comp} components, the domain has to be connected.")
            raise ConfigError(f"active set has {n_comp} 4-connected components")

        self.nx = int(nx)
        self.ny = int(ny)
        self.h = float(h)
        self.mask = mask
        self.mask.setflags(write=False)
        self.shape_tag = shape_tag
        self.x0, self.y0 = float(origin[0]), float(origin[1])

        self._coords = None
        self._cell_mask = None
        self._weights = None

    def __repr__(self):
        return f"GridDomain({self.nx}x{self.ny}, h={self.h:.6g}, {self.shape_tag}, active={self.n_active})"

    def __eq__(self, other):
        return (isinstance(other, GridDomain) and self.nx == other.nx and self.ny == other.ny
                and self.h == other.h and self.x0 == other.x0 and self.y0 == other.y0
                and np.array_equal(self.mask, other.mask))

    def __hash__(self):
        return hash((self.nx, self.ny, self.h, self.x0, self.y0))

    @property
    def shape(self):
        return self.ny, self.nx

    @property
    def n_active(self):
        return int(self.mask.sum())

    def node_coords(self):
        """
        Returns:
            (tuple): X and Y coordinate arrays of shape (ny, nx).
        """
        if self._coords is None:
            x = self.x0 + self.h * np.arange(self.nx)
            y = self.y0 + self.h * np.arange(self.ny)
            self._coords = np.meshgrid(x, y)
        return self._coords

    def cell_centers(self):
        x = self.x0 + self.h * (np.arange(self.nx - 1) + 0.5)
        y = self.y0 + self.h * (np.arange(self.ny - 1) + 0.5)
        return np.meshgrid(x, y)

    @property
    def cell_mask(self):
        """
        Interior cells, all four corners active.
        """
        if self._cell_mask is None:
            m = self.mask
            self._cell_mask = m[:-1, :-1] & m[:-1, 1:] & m[1:, :-1] & m[1:, 1:]
        return self._cell_mask

    def edge_active(self):
        m = self.mask
        return m[:, :-1] & m[:, 1:], m[:-1, :] & m[1:, :]

    def edge_weights(self):
        """
        Number of interior cells on each edge, halved. Interior edges get 1 and mask boundary edges 1/2.

        Returns:
            (tuple): Arrays for the x-edges (ny, nx-1) and y-edges (ny-1, nx).
        """
        if self._weights is None:
            c = self.cell_mask.astype(float)
            wx = np.zeros((self.ny, self.nx - 1))
            wx[:-1, :] += c
            wx[1:, :] += c
            wy = np.zeros((self.ny - 1, self.nx))
            wy[:, :-1] += c
            wy[:, 1:] += c
            self._weights = (0.5 * wx, 0.5 * wy)
        return self._weights

    def boundary_nodes(self):
        """
        Active nodes with an inactive 4-neighbour, or on the edge of the array.
        """
        padded = np.pad(self.mask, 1, constant_values=False)
        interior = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
        return self.mask & ~interior

    def cell_index(self, x, y):
        """
        Cell (plaquette) containing the point, as (j, i).
        """
        return int(np.floor((y - self.y0) / self.h)), int(np.floor((x - self.x0) / self.h))

    def cell_center(self, j, i):
        return self.x0 + (i + 0.5) * self.h, self.y0 + (j + 0.5) * self.h

    def node_at(self, x, y):
        """
        Nearest node to the point, as (j, i), or None when it falls off the array.
        """
        j = int(np.rint((y - self.y0) / self.h))
        i = int(np.rint((x - self.x0) / self.h))
        if 0 <= j < self.ny and 0 <= i < self.nx:
            return j, i
        return None

    def restrict(self, mask):
        """
        Sub-domain with the same lattice and a smaller active set.

        Args:
            mask (ndarray): Boolean (ny, nx) array, combined with the current mask.

        Returns:
            (obj): New GridDomain.
        """
        return GridDomain(self.nx, self.ny, self.h, self.mask & np.asarray(mask, dtype=bool), self.shape_tag,
                          (self.x0, self.y0))


def make_domain(shape_tag, resolution):
    """
    Build the grid domain of a shape. The spacing is the bounding box side over resolution - 1.

    Args:
        shape_tag (obj): ShapeTag, or its string form.
        resolution (int): Node count along the longer bounding box side.

    Returns:
        (obj): GridDomain.
    """
    if isinstance(shape_tag, str):
        shape_tag = ShapeTag.parse(shape_tag)

    resolution = int(resolution)
    if resolution < 2:
        raise ConfigError(f"resolution has to be at least 2, got {resolution}")
    if resolution < 16:
        logger.warning(f"Resolution {resolution} is below 16, expect coarse results.")

    xmin, ymin, xmax, ymax = shape_tag.bbox
    width, height = xmax - xmin, ymax - ymin
    h = max(width, height) / (resolution - 1)

    if shape_tag.kind == 'disk':
        nx = ny = resolution
        # Put the disk center on a plaquette center, never on a node.
        shift = 0.5 * h if resolution % 2 == 1 else 0.0
        origin = (xmin + shift, ymin + shift)
    else:
        nx = int(round(width / h)) + 1
        ny = int(round(height / h)) + 1
        origin = (xmin, ymin)

    x = origin[0] + h * np.arange(nx)
    y = origin[1] + h * np.arange(ny)
    X, Y = np.meshgrid(x, y)
    mask = shape_tag.contains(X, Y)

    logger.debug(f"grid: make_domain: shape: {shape_tag} nx: {nx} ny: {ny} h: {h} active: {int(mask.sum())}")
    return GridDomain(nx, ny, h, mask, shape_tag, origin)


class AngleField(object):
    def __init__(self, domain, theta):
        """
        Circle-valued map u = e^{i theta}, stored as nodal angles.

        Args:
            domain (obj): GridDomain.
            theta (ndarray): (ny, nx) angles, inactive entries are ignored.
        """
        theta = np.array(theta, dtype=float)
        if theta.shape != domain.shape:
            raise ParameterError(f"angle array shape {theta.shape} doesn't match domain {domain.shape}")
        if not np.all(np.isfinite(theta[domain.mask])):
            raise ParameterError("angle field has non-finite values on active nodes")

        theta[~domain.mask] = 0.0
        self.domain = domain
        self.theta = theta

    def __repr__(self):
        return f"AngleField({self.domain!r})"

    def shifted(self, c):
        return AngleField(self.domain, self.theta + c)

    def circle_equal(self, other, tol=1e-9):
        """
        Two angle fields are equal as maps when their principal value difference vanishes everywhere.
        """
        if other.domain != self.domain:
            return False
        d = pv_diff(self.theta, other.theta)[self.domain.mask]
        return bool(np.all(np.abs(d) < tol))

    def unit_vectors(self):
        return np.cos(self.theta), np.sin(self.theta)


class ScalarField(object):
    def __init__(self, domain, values):
        """
        Nodal real field, either a phase field v or a lifting phi.

        Args:
            domain (obj): GridDomain.
            values (ndarray): (ny, nx) values, inactive entries are ignored.
        """
        values = np.array(values, dtype=float)
        if values.shape != domain.shape:
            raise ParameterError(f"value array shape {values.shape} doesn't match domain {domain.shape}")
        if not np.all(np.isfinite(values[domain.mask])):
            raise ParameterError("scalar field has non-finite values on active nodes")

        values[~domain.mask] = 0.0
        self.domain = domain
        self.values = values

    def __repr__(self):
        return f"ScalarField({self.domain!r})"

    @classmethod
    def full(cls, domain, value):
        return cls(domain, np.full(domain.shape, float(value)))

    def clamped(self, lo=0.0, hi=1.0):
        return ScalarField(self.domain, np.clip(self.values, lo, hi))

    def as_angles(self):
        return AngleField(self.domain, self.values)

    def active_values(self):
        return self.values[self.domain.mask]


class EdgeSet(object):
    def __init__(self, domain, ex=None, ey=None):
        """
        Set of grid edges, (x, j, i) joins node (j, i) to (j, i+1) and (y, j, i) joins (j, i) to (j+1, i).

        Args:
            domain (obj): GridDomain.
            ex (ndarray): Boolean (ny, nx-1) array of x-edges.
            ey (ndarray): Boolean (ny-1, nx) array of y-edges.
        """
        self.domain = domain
        self.ex = np.zeros((domain.ny, domain.nx - 1), dtype=bool) if ex is None else np.array(ex, dtype=bool)
        self.ey = np.zeros((domain.ny - 1, domain.nx), dtype=bool) if ey is None else np.array(ey, dtype=bool)

        if self.ex.shape != (domain.ny, domain.nx - 1) or self.ey.shape != (domain.ny - 1, domain.nx):
            raise ParameterError("edge arrays don't match the domain")

        ax, ay = domain.edge_active()
        if np.any(self.ex & ~ax) or np.any(self.ey & ~ay):
            raise ParameterError("edge set lists edges with an inactive endpoint")

    @classmethod
    def from_edges(cls, domain, edges):
        """
        Args:
            domain (obj): GridDomain.
            edges (list): Iterable of (axis, j, i) triples.
        """
        es = cls(domain)
        for axis, j, i in edges:
            es.add(axis, j, i)
        return es

    def add(self, axis, j, i):
        ax, ay = self.domain.edge_active()
        if axis == 'x':
            if not ax[j, i]:
                raise ParameterError(f"edge ({axis}, {j}, {i}) has an inactive endpoint")
            self.ex[j, i] = True
        elif axis == 'y':
            if not ay[j, i]:
                raise ParameterError(f"edge ({axis}, {j}, {i}) has an inactive endpoint")
            self.ey[j, i] = True
        else:
            raise ParameterError(f"unknown axis {axis}")

    def __len__(self):
        return int(self.ex.sum() + self.ey.sum())

    def __iter__(self):
        for j, i in zip(*np.nonzero(self.ex)):
            yield 'x', int(j), int(i)
        for j, i in zip(*np.nonzero(self.ey)):
            yield 'y', int(j), int(i)

    def __contains__(self, edge):
        axis, j, i = edge
        arr = self.ex if axis == 'x' else self.ey
        return 0 <= j < arr.shape[0] and 0 <= i < arr.shape[1] and bool(arr[j, i])

    def __or__(self, other):
        return EdgeSet(self.domain, self.ex | other.ex, self.ey | other.ey)

    def __and__(self, other):
        return EdgeSet(self.domain, self.ex & other.ex, self.ey & other.ey)

    def __sub__(self, other):
        return EdgeSet(self.domain, self.ex & ~other.ex, self.ey & ~other.ey)

    def __eq__(self, other):
        return (isinstance(other, EdgeSet) and np.array_equal(self.ex, other.ex)
                and np.array_equal(self.ey, other.ey))

    def __repr__(self):
        return f"EdgeSet({len(self)} edges, length={self.length():.6g})"

    def length(self):
        """
        Measure of the dual curve: h per interior edge, h/2 per edge on the mask boundary.
        """
        wx, wy = self.domain.edge_weights()
        return self.domain.h * float(wx[self.ex].sum() + wy[self.ey].sum())

    def cell_mask(self):
        """
        Cells having one of the edges as a side.
        """
        ny, nx = self.domain.shape
        cells = np.zeros((ny - 1, nx - 1), dtype=bool)
        cells |= self.ex[:-1, :]
        cells |= self.ex[1:, :]
        cells |= self.ey[:, :-1]
        cells |= self.ey[:, 1:]
        return cells

    def to_list(self):
        return [[axis, j, i] for axis, j, i in self]


def pv_diff(a, b):
    """
    Principal value of a - b in (-pi, pi], a tie at +-pi resolves to +pi.

    Args:
        a (float|ndarray): Angle(s).
        b (float|ndarray): Angle(s).

    Returns:
        (float|ndarray): The wrapped difference.
    """
    r = np.pi - np.mod(np.pi - np.subtract(a, b), TWO_PI)
    r = np.where(r <= -np.pi, r + TWO_PI, r)
    if np.ndim(r) == 0:
        return float(r)
    return r


def edge_diffs(field):
    """
    Differences along x-edges and y-edges, principal values for an AngleField.

    Args:
        field (obj): AngleField or ScalarField.

    Returns:
        (tuple): (ny, nx-1) and (ny-1, nx) arrays, value at the + end minus value at the - end.
    """
    if isinstance(field, AngleField):
        t = field.theta
        return pv_diff(t[:, 1:], t[:, :-1]), pv_diff(t[1:, :], t[:-1, :])

    v = field.values
    return v[:, 1:] - v[:, :-1], v[1:, :] - v[:-1, :]


def cell_grad_sq(dx, dy, domain):
    """
    Per-cell squared gradient from edge differences, averaging the two parallel edges of each direction.
    """
    g = (dx[:-1, :] ** 2 + dx[1:, :] ** 2 + dy[:, :-1] ** 2 + dy[:, 1:] ** 2) / (2.0 * domain.h ** 2)
    g[~domain.cell_mask] = 0.0
    return g


def grad_sq_circle(u):
    """
    Squared Frobenius norm of the gradient of u = e^{i theta} per cell. Only principal value
    differences enter, cells touching an inactive node are zero.

    Args:
        u (obj): AngleField.

    Returns:
        (ndarray): (ny-1, nx-1) array.
    """
    dx, dy = edge_diffs(u)
    return cell_grad_sq(dx, dy, u.domain)


def grad_sq_scalar(phi):
    """
    Same as grad_sq_circle with plain differences, for a single-valued lifting.
    """
    dx, dy = edge_diffs(phi)
    return cell_grad_sq(dx, dy, phi.domain)


def grad_sq(field):
    if isinstance(field, AngleField):
        return grad_sq_circle(field)
    return grad_sq_scalar(field)


def dirichlet_energy(field, exclude=None):
    """
    Integral of the squared gradient over the interior cells.

    Args:
        field (obj): AngleField or ScalarField.
        exclude (obj): Optional EdgeSet, cells having one of these edges as a side are skipped.

    Returns:
        (float): Dirichlet energy.
    """
    domain = field.domain
    cells = domain.cell_mask.copy()
    if exclude is not None and len(exclude):
        cells &= ~exclude.cell_mask()
    return float(grad_sq(field)[cells].sum() * domain.h ** 2)


def _segment_points(segs):
    if hasattr(segs, 'segments'):
        segs = segs.segments
    for s in segs:
        if hasattr(s, 'p'):
            yield s.p, s.q
        else:
            yield s[0], s[1]


def distance_to_segments(domain, segs):
    """
    Exact Euclidean distance from every node to a union of segments.

    Args:
        domain (obj): GridDomain.
        segs (obj): Connection, or a list of (p, q) point pairs.

    Returns:
        (obj): ScalarField of distances.
    """
    pairs = list(_segment_points(segs))
    if not pairs:
        raise ParameterError("distance_to_segments needs at least one segment")

    X, Y = domain.node_coords()
    dist = np.full(domain.shape, np.inf)

    for p, q in pairs:
        vx, vy = q[0] - p[0], q[1] - p[1]
        len2 = vx * vx + vy * vy
        if len2 == 0.0:
            t = 0.0
        else:
            t = np.clip(((X - p[0]) * vx + (Y - p[1]) * vy) / len2, 0.0, 1.0)
        dist = np.minimum(dist, np.hypot(X - (p[0] + t * vx), Y - (p[1] + t * vy)))

    return ScalarField(domain, np.where(domain.mask, dist, 0.0))


def edge_laplacian(domain, wx, wy):
    """
    Graph Laplacian over the full (ny * nx) node index space with the given edge weights,
    (L f)_k = sum over edges (k, l) of w * (f_k - f_l).

    Args:
        domain (obj): GridDomain.
        wx (ndarray): (ny, nx-1) weights of the x-edges, zero drops the edge.
        wy (ndarray): (ny-1, nx) weights of the y-edges.

    Returns:
        (obj): scipy.sparse csr matrix.
    """
    ny, nx = domain.shape
    n = nx * ny
    idx = np.arange(n).reshape(ny, nx)

    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    w = np.concatenate([np.ravel(wx), np.ravel(wy)])
    keep = w != 0
    a, b, w = a[keep], b[keep], w[keep]

    off = sparse.coo_matrix((np.concatenate([-w, -w]), (np.concatenate([a, b]), np.concatenate([b, a]))),
                            shape=(n, n))
    deg = np.bincount(a, weights=w, minlength=n) + np.bincount(b, weights=w, minlength=n)
    return (off + sparse.diags(deg)).tocsr()
