"""
Triangle Meshes and P1 Elements
Structured triangulations of the unit cell, squares and disks, with P1 assembly and point location
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from errors import InvalidParameterError
from linalg import finalize

logger = logging.getLogger(__name__)

BASE_RINGS = 4
CONFORMITY_TOL = 1e-14

# barycentric quadrature: edge midpoints (smooth coefficients) or centroid (piecewise)
EDGE_MIDPOINTS = (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]), np.full(3, 1.0 / 3.0))
CENTROID = (np.full((1, 3), 1.0 / 3.0), np.ones(1))
_REFERENCE_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


@dataclass
class TriangleMesh:
    """P1 triangulation; `classes` maps each vertex to its degree of freedom"""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    kind: str
    periodic_map: dict = None
    classes: np.ndarray = None
    period: float = None
    h: float = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.boundary = np.unique(np.asarray(self.boundary, dtype=np.int64))
        if self.classes is None:
            self.classes = np.arange(len(self.vertices))
        self.h = _max_edge(self.vertices, self.triangles)
        self._geometry = None
        self._tree = None

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_dofs(self):
        return int(self.classes.max()) + 1

    @property
    def is_periodic(self):
        return self.periodic_map is not None

    @property
    def interior(self):
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary] = False
        return np.nonzero(mask)[0]

    @property
    def dofs(self):
        """Degree of freedom of each triangle corner, shape (T, 3)"""
        return self.classes[self.triangles]

    def geometry(self):
        """Triangle areas (T,) and barycentric gradients (T, 3, 2)"""
        if self._geometry is None:
            self._geometry = _p1_geometry(self.vertices, self.triangles)
        return self._geometry

    @property
    def areas(self):
        return self.geometry()[0]

    @property
    def total_area(self):
        return float(self.areas.sum())

    def summary(self):
        return (f"{self.kind} mesh: {self.n_vertices} vertices, {self.n_triangles} triangles, "
                f"{self.n_dofs} dofs, h={self.h:.4g}")


def _max_edge(vertices, triangles):
    if len(triangles) == 0:
        return 0.0
    p = vertices[triangles]
    edges = [p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]]
    return float(max(np.linalg.norm(e, axis=1).max() for e in edges))


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _orient(vertices, triangles):
    triangles = np.array(triangles, dtype=np.int64)
    flip = _signed_areas(vertices, triangles) < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def _p1_geometry(vertices, triangles):
    p = vertices[triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    twice = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    grads = np.empty((len(triangles), 3, 2))
    grads[:, 0, 0] = y[:, 1] - y[:, 2]
    grads[:, 0, 1] = x[:, 2] - x[:, 1]
    grads[:, 1, 0] = y[:, 2] - y[:, 0]
    grads[:, 1, 1] = x[:, 0] - x[:, 2]
    grads[:, 2, 0] = y[:, 0] - y[:, 1]
    grads[:, 2, 1] = x[:, 1] - x[:, 0]
    grads /= twice[:, None, None]
    return 0.5 * twice, grads


# ---------------------------------------------------------------------------
# Builders

def _grid(divisions, lo, hi):
    """Criss-cross triangulation: the diagonal alternates in a checkerboard pattern"""
    n = divisions
    t = np.linspace(lo, hi, n + 1)
    xx, yy = np.meshgrid(t, t)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    triangles = []
    for j in range(n):
        for i in range(n):
            v00 = i + j * (n + 1)
            v10 = v00 + 1
            v01 = v00 + n + 1
            v11 = v01 + 1
            if (i + j) % 2 == 0:
                triangles += [(v00, v10, v11), (v00, v11, v01)]
            else:
                triangles += [(v00, v10, v01), (v10, v11, v01)]
    ij = np.arange((n + 1) ** 2)
    i, j = ij % (n + 1), ij // (n + 1)
    boundary = np.nonzero((i == 0) | (i == n) | (j == 0) | (j == n))[0]
    return vertices, np.array(triangles, dtype=np.int64), boundary, i, j


def unit_cell_mesh(divisions, periodic=True):
    """Mesh of Y = (0,1)^2; with periodic set, opposite faces share degrees of freedom"""
    if divisions < 2:
        raise InvalidParameterError(f"divisions must be at least 2, got {divisions}")
    vertices, triangles, boundary, i, j = _grid(divisions, 0.0, 1.0)
    if not periodic:
        return TriangleMesh(vertices, triangles, boundary, kind='cell')
    n = divisions
    classes = (i % n) + (j % n) * n
    masters = {}
    periodic_map = {}
    for v, c in enumerate(classes):
        if i[v] < n and j[v] < n:
            masters[c] = v
    for v, c in enumerate(classes):
        if i[v] == n or j[v] == n:
            periodic_map[v] = masters[c]
    return TriangleMesh(vertices, triangles, boundary, kind='cell', periodic_map=periodic_map,
                        classes=classes, period=1.0)


def square_mesh(lo, hi, divisions):
    """Uniform criss-cross mesh of [lo, hi]^2 with h = sqrt(2) (hi - lo) / divisions"""
    if not hi > lo:
        raise InvalidParameterError(f"square needs hi > lo, got [{lo}, {hi}]")
    if divisions < 2:
        raise InvalidParameterError(f"divisions must be at least 2, got {divisions}")
    vertices, triangles, boundary, _, _ = _grid(divisions, lo, hi)
    return TriangleMesh(vertices, triangles, boundary, kind='square')


def disk_mesh(radius, refinement=1, rings=None):
    """
    Concentric-ring mesh of the disk of given radius.

    Ring i carries 6i vertices on the circle of radius R i / rings; the outer ring lies
    exactly on the boundary. rings = 4 * 2^(refinement-1) unless given explicitly.
    """
    if not radius > 0:
        raise InvalidParameterError(f"radius must be positive, got {radius}")
    if refinement < 1:
        raise InvalidParameterError(f"refinement must be at least 1, got {refinement}")
    if rings is None:
        rings = BASE_RINGS * 2 ** (refinement - 1)
    if rings < 1:
        raise InvalidParameterError(f"rings must be at least 1, got {rings}")

    starts = [0]
    vertices = [(0.0, 0.0)]
    for i in range(1, rings + 1):
        starts.append(len(vertices))
        r = radius * i / rings
        for j in range(6 * i):
            t = 2.0 * math.pi * j / (6 * i)
            vertices.append((r * math.cos(t), r * math.sin(t)))

    def at(i, j):
        return 0 if i == 0 else starts[i] + j % (6 * i)

    triangles = []
    for i in range(1, rings + 1):
        for s in range(6):
            for t in range(i):
                a0 = at(i - 1, s * (i - 1) + t)
                triangles.append((a0, at(i, s * i + t), at(i, s * i + t + 1)))
                if t < i - 1:
                    triangles.append((a0, at(i, s * i + t + 1), at(i - 1, s * (i - 1) + t + 1)))

    vertices = np.array(vertices)
    boundary = np.arange(starts[rings], len(vertices))
    return TriangleMesh(vertices, _orient(vertices, triangles), boundary, kind='disk')


# ---------------------------------------------------------------------------
# Domains

@dataclass(frozen=True)
class Domain:
    """Disk B_R centred at the origin, or the square [lo, hi]^2"""

    kind: str
    radius: float = None
    lo: float = None
    hi: float = None

    @classmethod
    def disk(cls, radius):
        if not radius > 0:
            raise InvalidParameterError(f"disk radius must be positive, got {radius}")
        return cls(kind='disk', radius=float(radius))

    @classmethod
    def square(cls, lo, hi):
        if not hi > lo:
            raise InvalidParameterError(f"square needs hi > lo, got [{lo}, {hi}]")
        return cls(kind='square', lo=float(lo), hi=float(hi))

    @classmethod
    def parse(cls, text):
        """'disk:R' or 'square:lo,hi'"""
        kind, _, args = text.strip().partition(':')
        try:
            values = [float(v) for v in args.split(',') if v.strip()]
        except ValueError:
            raise InvalidParameterError(f"bad domain {text!r}")
        if kind == 'disk' and len(values) == 1:
            return cls.disk(values[0])
        if kind == 'square' and len(values) == 2:
            return cls.square(values[0], values[1])
        raise InvalidParameterError(f"domain must be 'disk:R' or 'square:lo,hi', got {text!r}")

    @property
    def is_disk(self):
        return self.kind == 'disk'

    @property
    def area(self):
        if self.is_disk:
            return math.pi * self.radius ** 2
        return (self.hi - self.lo) ** 2

    @property
    def equivalent_radius(self):
        """Radius of the disk with the same area"""
        return math.sqrt(self.area / math.pi)

    def contains(self, points, shrink=1.0):
        points = np.atleast_2d(points)
        if self.is_disk:
            return np.hypot(points[:, 0], points[:, 1]) < shrink * self.radius
        centre = 0.5 * (self.lo + self.hi)
        half = 0.5 * shrink * (self.hi - self.lo)
        return np.all(np.abs(points - centre) < half, axis=1)

    def build_mesh(self, h_max, multiple=1):
        """Smallest structured mesh with h <= h_max; square divisions rounded up to `multiple`"""
        if not h_max > 0:
            raise InvalidParameterError(f"h_max must be positive, got {h_max}")
        if self.is_disk:
            rings = max(2, math.ceil(self.radius / h_max))
            mesh = disk_mesh(self.radius, rings=rings)
            while mesh.h > h_max:
                rings = math.ceil(rings * mesh.h / h_max)
                mesh = disk_mesh(self.radius, rings=rings)
            return mesh
        divisions = max(2, math.ceil(math.sqrt(2.0) * (self.hi - self.lo) / h_max - 1e-9))
        divisions = multiple * math.ceil(divisions / multiple)
        return square_mesh(self.lo, self.hi, divisions)

    def to_text(self):
        if self.is_disk:
            return f'disk:{self.radius:g}'
        return f'square:{self.lo:g},{self.hi:g}'


# ---------------------------------------------------------------------------
# Checks

def check_conformity(mesh):
    """Positive areas, interior edges shared twice, boundary edges once, periodic images aligned"""
    if np.any(_signed_areas(mesh.vertices, mesh.triangles) <= 0):
        return False
    edges = np.sort(np.concatenate([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]],
                                    mesh.triangles[:, [2, 0]]]), axis=1)
    unique, counts = np.unique(edges, axis=0, return_counts=True)
    if np.any(counts > 2):
        return False
    boundary = np.zeros(mesh.n_vertices, dtype=bool)
    boundary[mesh.boundary] = True
    single = unique[counts == 1]
    if not np.all(boundary[single]):
        return False
    if mesh.is_periodic:
        for slave, master in mesh.periodic_map.items():
            shift = mesh.vertices[slave] - mesh.vertices[master]
            if np.abs(shift - np.round(shift / mesh.period) * mesh.period).max() > 1e-12:
                return False
    return True


# ---------------------------------------------------------------------------
# P1 assembly

def quadrature_rule(field):
    """Centroid rule for piecewise coefficients, edge midpoints otherwise"""
    return CENTROID if field.kind == 'piecewise' else EDGE_MIDPOINTS


def quadrature_points(mesh, rule):
    bary, _ = rule
    p = mesh.vertices[mesh.triangles]
    return np.einsum('qk,tkd->tqd', bary, p)


def triangle_tensors(mesh, field):
    """Quadrature average of A over each triangle, shape (T, 2, 2)"""
    rule = quadrature_rule(field)
    points = quadrature_points(mesh, rule)
    values = field.tensor(points.reshape(-1, 2)).reshape(mesh.n_triangles, len(rule[1]), 2, 2)
    return np.einsum('q,tqij->tij', rule[1], values)


def _assemble(mesh, local, dofs=None, size=None):
    dofs = mesh.dofs if dofs is None else dofs
    size = mesh.n_dofs if size is None else size
    rows = np.repeat(dofs, 3, axis=1)
    cols = np.tile(dofs, (1, 3))
    return finalize(rows, cols, local.reshape(len(dofs), 9), (size, size))


def assemble_stiffness(mesh, tensors=None):
    """K_ij = int A grad(phi_j) . grad(phi_i); tensors per triangle or None for A = I"""
    areas, grads = mesh.geometry()
    if tensors is None:
        local = np.einsum('t,tai,tbi->tab', areas, grads, grads)
    else:
        local = np.einsum('t,tai,tij,tbj->tab', areas, grads, tensors, grads)
    return _assemble(mesh, local)


def assemble_mass(mesh, field=None, weight=None):
    """
    M_ij = int c phi_i phi_j with c = n from `field`, or weight(n) when given.

    Piecewise coefficients are taken constant per triangle (centroid value).
    """
    areas, _ = mesh.geometry()
    if field is None:
        local = areas[:, None, None] * _REFERENCE_MASS
        return _assemble(mesh, local)
    rule = quadrature_rule(field)
    bary, wq = rule
    points = quadrature_points(mesh, rule)
    c = field.index(points.reshape(-1, 2)).reshape(mesh.n_triangles, len(wq))
    if weight is not None:
        c = weight(c)
    if field.kind == 'piecewise':
        local = (areas * c[:, 0])[:, None, None] * _REFERENCE_MASS
    else:
        local = np.einsum('t,q,tq,qa,qb->tab', areas, wq, c, bary, bary)
    return _assemble(mesh, local)


def lumped_mass(mesh):
    """Row sums of the unweighted mass matrix, one entry per dof"""
    areas, _ = mesh.geometry()
    return np.bincount(mesh.dofs.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=mesh.n_dofs)


def assemble_flux_load(mesh, tensors, direction):
    """b_i = int (A e) . grad(phi_i) for a fixed vector e"""
    areas, grads = mesh.geometry()
    flux = tensors @ np.asarray(direction, dtype=float)
    local = np.einsum('t,tai,ti->ta', areas, grads, flux)
    return np.bincount(mesh.dofs.ravel(), weights=local.ravel(), minlength=mesh.n_dofs)


def vertex_values(mesh, field):
    """n sampled at the vertices, shape (V,)"""
    return field.index(mesh.vertices)


# ---------------------------------------------------------------------------
# Point location

def locate(mesh, points):
    """Containing triangle and barycentric coordinates for each point"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if mesh.is_periodic:
        points = np.mod(points, mesh.period)
    if mesh._tree is None:
        centroids = mesh.vertices[mesh.triangles].mean(axis=1)
        mesh._tree = cKDTree(centroids)
    k = min(12, mesh.n_triangles)
    _, candidates = mesh._tree.query(points, k=k)
    candidates = np.atleast_2d(candidates).reshape(len(points), k)

    found = np.empty(len(points), dtype=np.int64)
    bary = np.empty((len(points), 3))
    for p, row in enumerate(candidates):
        best, best_score, best_lam = row[0], -np.inf, None
        for t in row:
            lam = _barycentric(mesh, t, points[p])
            score = lam.min()
            if score > best_score:
                best, best_score, best_lam = t, score, lam
            if score >= -1e-12:
                break
        found[p] = best
        bary[p] = best_lam
    return found, bary


def _barycentric(mesh, t, point):
    a, b, c = mesh.vertices[mesh.triangles[t]]
    m = np.array([[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]])
    s = np.linalg.solve(m, point - a)
    return np.array([1.0 - s.sum(), s[0], s[1]])


def interpolate(mesh, dof_values, points):
    """Evaluate a P1 function given by its dof values at arbitrary points"""
    triangles, bary = locate(mesh, points)
    corner_values = np.asarray(dof_values)[mesh.dofs[triangles]]
    return np.sum(corner_values * bary, axis=1)


# ---------------------------------------------------------------------------
# Plain-text dump

def dump(mesh, stem):
    """Write <stem>.nodes ("x y" per line) and <stem>.elements ("i j k", zero-based)"""
    np.savetxt(f'{stem}.nodes', mesh.vertices, fmt='%.17g')
    np.savetxt(f'{stem}.elements', mesh.triangles, fmt='%d')
    logger.info(f"mesh written to {stem}.nodes / {stem}.elements")
    return f'{stem}.nodes', f'{stem}.elements'


def load(stem, kind='square'):
    vertices = np.loadtxt(f'{stem}.nodes', ndmin=2)
    triangles = np.loadtxt(f'{stem}.elements', dtype=np.int64, ndmin=2)
    edges = np.sort(np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]), axis=1)
    unique, counts = np.unique(edges, axis=0, return_counts=True)
    boundary = np.unique(unique[counts == 1])
    return TriangleMesh(vertices, triangles, boundary, kind=kind)
