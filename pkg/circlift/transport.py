import logging

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import cdist

from circlift.exceptions import BudgetError, ParameterError
from circlift.utils import SCHEMA_VERSION

logger = logging.getLogger('circlift')

COLLAPSE_TOL = 1e-7
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class Segment:
    """
    Oriented segment p -> q, its boundary is delta_q - delta_p.
    """
    p: tuple
    q: tuple
    multiplicity: int = 1

    @property
    def length(self):
        return float(np.hypot(self.q[0] - self.p[0], self.q[1] - self.p[1]))

    def to_dict(self):
        return {'p': list(self.p), 'q': list(self.q), 'multiplicity': self.multiplicity}


@dataclass
class Connection:
    segments: list = field(default_factory=list)

    @property
    def total_length(self):
        # Multiplicity doesn't weight the length, the cost is 1 per unit length.
        return float(sum(s.length for s in self.segments))

    def __len__(self):
        return len(self.segments)

    def to_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'segments': [s.to_dict() for s in self.segments],
            'total_length': self.total_length,
        }


class ChargeConfig(object):
    def __init__(self, positives, negatives, domain):
        """
        Signed point charges inside a domain, each atom carries charge +1 or -1.

        Args:
            positives (list): Points of the positive atoms.
            negatives (list): Points of the negative atoms.
            domain (obj): GridDomain or ShapeTag giving the boundary geometry.
        """
        self.shape = getattr(domain, 'shape_tag', domain)
        self.positives = [tuple(float(c) for c in p) for p in positives]
        self.negatives = [tuple(float(c) for c in p) for p in negatives]

        for p in self.positives + self.negatives:
            if len(p) != 2 or self.shape.boundary_distance(p) <= 0.0:
                logger.error(f"The charge at {p} isn't strictly inside {self.shape}.")
                raise ParameterError(f"charge {p} lies outside {self.shape}")

    def __len__(self):
        return len(self.positives) + len(self.negatives)

    def charges(self):
        return [(p, 1) for p in self.positives] + [(p, -1) for p in self.negatives]

    @classmethod
    def from_dict(cls, data, domain):
        return cls(data.get('positives', []), data.get('negatives', []), domain)


def _segment_for(a, sa, b=None, boundary_pt=None):
    """
    Orient a plan entry: pairs run negative -> positive, boundary segments into a
    positive charge or out of a negative one.
    """
    if b is not None:
        return Segment(a, b) if sa < 0 else Segment(b, a)
    if sa > 0:
        return Segment(boundary_pt, a)
    return Segment(a, boundary_pt)


def minimal_connection(cfg, max_charges=8):
    """
    Exact minimal connection by exhaustive search over partial matchings: every charge
    is matched to an opposite charge or discharged to the nearest boundary point.

    Args:
        cfg (obj): ChargeConfig.
        max_charges (int): Enumeration budget.

    Returns:
        (obj): Connection.
    """
    charges = cfg.charges()
    n = len(charges)
    if n > max_charges:
        logger.error(f"{n} charges exceed the exhaustive budget of {max_charges}, a heuristic would be needed.")
        raise BudgetError(f"{n} charges exceed the enumeration budget of {max_charges}")

    if not n:
        return Connection()

    pts = np.array([c[0] for c in charges])
    signs = [c[1] for c in charges]
    dist = cdist(pts, pts)
    bpts = [cfg.shape.nearest_boundary_point(p) for p, _ in charges]
    bcost = [float(np.hypot(p[0] - b[0], p[1] - b[1])) for (p, _), b in zip(charges, bpts)]

    @lru_cache(maxsize=None)
    def best(remaining):
        if not remaining:
            return 0.0, ()

        i = min(remaining)
        rest = remaining - {i}

        cost, plan = best(rest)
        result = (cost + bcost[i], ((i, None),) + plan)

        for j in sorted(rest):
            if signs[j] == signs[i]:
                continue
            cost, plan = best(rest - {j})
            if cost + dist[i, j] < result[0]:
                result = (cost + dist[i, j], ((i, j),) + plan)
        return result

    total, plan = best(frozenset(range(n)))

    segments = []
    for i, j in plan:
        if j is None:
            segments.append(_segment_for(charges[i][0], signs[i], boundary_pt=tuple(bpts[i])))
        else:
            segments.append(_segment_for(charges[i][0], signs[i], b=charges[j][0]))

    logger.debug(f"transport: minimal_connection: charges: {n} total: {total} plan: {plan}")
    return Connection(segments)


@dataclass
class BoundaryCheck:
    ok: bool
    discrepancies: list

    def __bool__(self):
        return self.ok


def verify_boundary(conn, cfg, tol=BOUNDARY_TOL):
    """
    Check that the boundary of the connection reproduces the charges, endpoints on the
    domain boundary are free.

    Args:
        conn (obj): Connection.
        cfg (obj): ChargeConfig.
        tol (float): Distance at which two endpoints are the same point.

    Returns:
        (obj): BoundaryCheck, truthy when the bookkeeping balances.
    """
    ledger = []

    def add(pt, w):
        for entry in ledger:
            if np.hypot(entry[0][0] - pt[0], entry[0][1] - pt[1]) <= tol:
                entry[1] += w
                return
        ledger.append([tuple(pt), w])

    for s in conn.segments:
        add(s.q, s.multiplicity)
        add(s.p, -s.multiplicity)
    for p, sign in cfg.charges():
        add(p, -sign)

    discrepancies = [(pt, w) for pt, w in ledger
                     if w != 0 and abs(cfg.shape.boundary_distance(pt)) > tol]
    if discrepancies:
        logger.debug(f"transport: verify_boundary: discrepancies: {discrepancies}")
    return BoundaryCheck(not discrepancies, discrepancies)


def _full_topologies(n):
    """
    Edge lists of every full Steiner topology on n terminals. Terminals are 0..n-1,
    Steiner points n..2n-3.
    """
    start = [(0, n), (1, n), (2, n)]
    topologies = [start]
    for k in range(3, n):
        s = n + k - 2
        grown = []
        for edges in topologies:
            for idx, (a, b) in enumerate(edges):
                new = edges[:idx] + edges[idx + 1:] + [(a, s), (b, s), (k, s)]
                grown.append(new)
        topologies = grown
    return topologies


def _relax_steiner(term, edges, n, init, tol, max_iters=2000):
    """
    Smith's iteration: with edge weights 1/|e| frozen, the Steiner points solve a small
    linear system, repeat until they stop moving.
    """
    k = n - 2
    pos = init.copy()
    for _ in range(max_iters):
        a = np.zeros((k, k))
        b = np.zeros((k, 2))
        for u, v in edges:
            pu = term[u] if u < n else pos[u - n]
            pv = term[v] if v < n else pos[v - n]
            w = 1.0 / max(float(np.hypot(*(pu - pv))), 1e-12)
            for s, o, po in ((u, v, pv), (v, u, pu)):
                if s < n:
                    continue
                a[s - n, s - n] += w
                if o < n:
                    b[s - n] += w * po
                else:
                    a[s - n, o - n] -= w
        new = np.linalg.solve(a, b)
        move = float(np.max(np.abs(new - pos)))
        pos = new
        if move < tol:
            break
    return pos


def _tree_length(term, pos, edges):
    pts = np.vstack([term, pos])
    return float(sum(np.hypot(*(pts[u] - pts[v])) for u, v in edges))


def _mst(term):
    """
    Minimum spanning tree edges and length of the terminals.
    """
    tree = minimum_spanning_tree(cdist(term, term)).tocoo()
    edges = list(zip(tree.row.tolist(), tree.col.tolist()))
    return edges, float(tree.data.sum())


def steiner_tree(terminals, max_terminals=5, tol=1e-8, restarts=3, seed=0):
    """
    Exact Euclidean Steiner tree by enumerating every full topology and relaxing its
    Steiner points. Degenerate trees show up as full topologies with collapsed edges.

    Args:
        terminals (list): 2D points, 2 to max_terminals of them.
        max_terminals (int): Enumeration budget.
        tol (float): Geometric tolerance of the Steiner point iteration.
        restarts (int): Random initial placements tried per topology.
        seed (int): Seed of the initial placements.

    Returns:
        (obj): Connection, its length certified against the minimum spanning tree.
    """
    term = np.unique(np.asarray(terminals, dtype=float).reshape(-1, 2), axis=0)
    n = len(term)
    if n < 2:
        raise ParameterError("a Steiner tree needs at least 2 distinct terminals")
    if n > max_terminals:
        logger.error(f"{n} terminals exceed the exhaustive budget of {max_terminals}.")
        raise BudgetError(f"{n} terminals exceed the enumeration budget of {max_terminals}")

    mst_edges, mst_len = _mst(term)
    if n == 2:
        return Connection([Segment(tuple(term[0]), tuple(term[1]))])

    rng = np.random.default_rng(seed)
    lo, hi = term.min(axis=0), term.max(axis=0)

    best = (np.inf, None, None)
    topologies = _full_topologies(n)
    for edges in topologies:
        for _ in range(max(1, restarts)):
            init = lo + (hi - lo) * rng.random((n - 2, 2))
            pos = _relax_steiner(term, edges, n, init, tol)
            length = _tree_length(term, pos, edges)
            if length < best[0]:
                best = (length, pos, edges)

    length, pos, edges = best
    logger.debug(f"transport: steiner_tree: terminals: {n} topologies: {len(topologies)} "
                 f"steiner: {length} mst: {mst_len}")

    if mst_len <= length:
        return Connection([Segment(tuple(term[u]), tuple(term[v])) for u, v in mst_edges])

    pts = np.vstack([term, pos])
    segments = [Segment(tuple(pts[u]), tuple(pts[v])) for u, v in edges
                if np.hypot(*(pts[u] - pts[v])) >= COLLAPSE_TOL]
    return Connection(segments)


def mst_length(terminals):
    term = np.unique(np.asarray(terminals, dtype=float).reshape(-1, 2), axis=0)
    return _mst(term)[1]


def charge_steiner(cfg, max_terminals=5, tol=1e-8, restarts=3, seed=0, max_charges=8):
    """
    Connected variant: all positive charge sits at one point x and the jump set has to be
    a connected set through x and every negative charge. The boundary can't help as long
    as the tree is shorter than the distance from the terminals to the boundary, past
    that the minimal connection is returned instead.

    Args:
        cfg (obj): ChargeConfig with a single positive location.

    Returns:
        (obj): Connection.
    """
    sources = {p for p in cfg.positives}
    if len(sources) != 1 or not cfg.negatives:
        raise ParameterError("the Steiner variant needs one positive location and at least one negative charge")

    terminals = list(sources) + cfg.negatives
    conn = steiner_tree(terminals, max_terminals=max_terminals, tol=tol, restarts=restarts, seed=seed)
    reach = min(cfg.shape.boundary_distance(p) for p in terminals)
    if conn.total_length < reach:
        return conn

    logger.warning(f"The Steiner tree ({conn.total_length:.6g}) is longer than the distance to the boundary "
                   f"({reach:.6g}), falling back to the minimal connection.")
    return minimal_connection(cfg, max_charges=max_charges)
