"""
Periodic Coefficient Fields
Material tensors A(y) and indices n(y) on the unit cell, their rescalings A(x/eps), n(x/eps), and named presets
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from errors import InvalidParameterError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
ROTATION_ANGLE = 1.0
JUMP_SAMPLES = 513
GAUSS_POINTS = 10
GAUSS_PANELS = 8

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(GAUSS_POINTS)


@dataclass(frozen=True)
class CoefficientField:
    """
    Periodic pair (A, n) on Y = (0,1)^2.

    a_fn(y1, y2) returns the entries (a11, a12, a22) and n_fn(y1, y2) the index, both
    vectorized over arrays of cell coordinates. Physical points are mapped to the cell
    by x / epsilon mod 1.
    """

    name: str
    a_fn: object
    n_fn: object
    kind: str
    bounds: tuple
    epsilon: float = 1.0
    a_is_identity: bool = False
    params: dict = field(default_factory=dict)

    @property
    def a_min(self):
        return self.bounds[0]

    @property
    def a_max(self):
        return self.bounds[1]

    @property
    def n_min(self):
        return self.bounds[2]

    @property
    def n_max(self):
        return self.bounds[3]

    @property
    def is_constant(self):
        return self.kind == 'constant'

    def cell_coordinates(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.mod(points / self.epsilon, 1.0)

    def tensor(self, points):
        """A at physical points, shape (P, 2, 2)"""
        y = self.cell_coordinates(points)
        a11, a12, a22 = self.a_fn(y[:, 0], y[:, 1])
        out = np.empty((y.shape[0], 2, 2))
        out[:, 0, 0] = a11
        out[:, 0, 1] = a12
        out[:, 1, 0] = a12
        out[:, 1, 1] = a22
        return out

    def index(self, points):
        """n at physical points, shape (P,)"""
        y = self.cell_coordinates(points)
        return np.broadcast_to(np.asarray(self.n_fn(y[:, 0], y[:, 1]), dtype=float),
                               (y.shape[0],)).copy()

    def to_dict(self):
        return {
            'name': self.name,
            'kind': self.kind,
            'epsilon': self.epsilon,
            'a_min': self.a_min,
            'a_max': self.a_max,
            'n_min': self.n_min,
            'n_max': self.n_max,
        }


def evaluate(field, y):
    """(A(y), n(y)) at a single point, wrapped into the cell"""
    y = np.asarray(y, dtype=float).reshape(1, 2)
    return field.tensor(y)[0], float(field.index(y)[0])


def rescale(field, epsilon):
    """The field x -> (A(x/epsilon), n(x/epsilon)); bounds are unchanged"""
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    if field.is_constant:
        return field
    return replace(field, epsilon=field.epsilon * epsilon)


def cell_field(field):
    """Undo any rescaling: the field in cell coordinates"""
    return replace(field, epsilon=1.0)


# ---------------------------------------------------------------------------
# Preset building blocks

def _ones(y1):
    return np.ones_like(np.asarray(y1, dtype=float))


def _scalar_a(values):
    return values, np.zeros_like(values), values


def _identity_a(y1, y2):
    return _scalar_a(_ones(y1))


def _unit_n(y1, y2):
    return _ones(y1)


def constant(a, n):
    """Homogeneous medium A = a I, index n"""
    if not a > 0 or not n > 0:
        raise InvalidParameterError(f"constant medium needs a > 0 and n > 0, got a={a}, n={n}")
    a = float(a)
    n = float(n)
    return CoefficientField(
        name=f'constant:{a:g},{n:g}',
        a_fn=lambda y1, y2: _scalar_a(a * _ones(y1)),
        n_fn=lambda y1, y2: n * _ones(y1),
        kind='constant',
        bounds=(a, a, n, n),
        a_is_identity=(a == 1.0),
        params={'a': a, 'n': n},
    )


def _sincos_n(y1, y2):
    return np.sin(TWO_PI * y1) ** 2 + np.cos(TWO_PI * y2) ** 2 + 2.0


def sincos_n():
    """n = sin^2(2 pi y1) + cos^2(2 pi y2) + 2 with A = I; mean 3"""
    return CoefficientField(name='sincos-n', a_fn=_identity_a, n_fn=_sincos_n,
                            kind='smooth', bounds=(1.0, 1.0, 2.0, 4.0), a_is_identity=True)


def _sincos_a(y1, y2):
    a11 = (np.sin(TWO_PI * y2) ** 2 + 1.0) / 3.0
    a22 = (np.cos(TWO_PI * y1) ** 2 + 1.0) / 3.0
    return a11, np.zeros_like(a11), a22


def sincos_a():
    """A = diag(sin^2(2 pi y2) + 1, cos^2(2 pi y1) + 1) / 3 with n = 1; divergence-free columns"""
    return CoefficientField(name='sincos-A', a_fn=_sincos_a, n_fn=_unit_n,
                            kind='smooth', bounds=(1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0))


def _rotation(angle):
    # clockwise
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s], [-s, c]])


def rotated_a(angle=ROTATION_ANGLE):
    """T A T^T for the sincos tensor, T the clockwise rotation by `angle` radians"""
    t = _rotation(angle)

    def a_fn(y1, y2):
        d1, _, d2 = _sincos_a(y1, y2)
        a11 = t[0, 0] ** 2 * d1 + t[0, 1] ** 2 * d2
        a12 = t[0, 0] * t[1, 0] * d1 + t[0, 1] * t[1, 1] * d2
        a22 = t[1, 0] ** 2 * d1 + t[1, 1] ** 2 * d2
        return a11, a12, a22

    return CoefficientField(name='rotated-A', a_fn=a_fn, n_fn=_unit_n, kind='smooth',
                            bounds=(1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0), params={'angle': angle})


def _layered_n(y1, y2):
    return np.sin(TWO_PI * y1) ** 2 + 2.0 + 0.0 * y2


def layered_n():
    """n = sin^2(2 pi y1) + 2 with A = I; mean 5/2"""
    return CoefficientField(name='layered-n', a_fn=_identity_a, n_fn=_layered_n,
                            kind='smooth', bounds=(1.0, 1.0, 2.0, 3.0), a_is_identity=True)


def layered_a(a1=1.0, a2=4.0):
    """A = a(y1) I, a = a1 on y1 < 1/2 and a2 otherwise; n = 1"""
    if not a1 > 0 or not a2 > 0:
        raise InvalidParameterError(f"layered-A needs positive phases, got {a1}, {a2}")

    def a_fn(y1, y2):
        values = np.where(np.asarray(y1) < 0.5, a1, a2) * _ones(y2)
        return _scalar_a(values)

    return CoefficientField(name=f'layered-A:{a1:g},{a2:g}', a_fn=a_fn, n_fn=_unit_n,
                            kind='piecewise', bounds=(min(a1, a2), max(a1, a2), 1.0, 1.0),
                            params={'a1': a1, 'a2': a2})


def checkerboard(a1=1.0, a2=1.0, n1=2.0, n2=5.0):
    """2x2 checkerboard: phase 1 where floor(2 y1) + floor(2 y2) is even"""
    for value in (a1, a2, n1, n2):
        if not value > 0:
            raise InvalidParameterError(f"checkerboard phases must be positive, got {value}")

    def phase_one(y1, y2):
        return (np.floor(2.0 * np.asarray(y1)) + np.floor(2.0 * np.asarray(y2))) % 2 == 0

    def a_fn(y1, y2):
        return _scalar_a(np.where(phase_one(y1, y2), a1, a2).astype(float))

    def n_fn(y1, y2):
        return np.where(phase_one(y1, y2), n1, n2).astype(float)

    return CoefficientField(
        name=f'checkerboard:{a1:g},{a2:g},{n1:g},{n2:g}', a_fn=a_fn, n_fn=n_fn,
        kind='piecewise', bounds=(min(a1, a2), max(a1, a2), min(n1, n2), max(n1, n2)),
        a_is_identity=(a1 == 1.0 and a2 == 1.0),
        params={'a1': a1, 'a2': a2, 'n1': n1, 'n2': n2})


def voids(radius=0.25, n_out=5.0, a_out=1.0):
    """Void of radius `radius` centred in the cell (A = I, n = 1) inside a matrix (a_out I, n_out)"""
    if not 0 < radius < 0.5:
        raise InvalidParameterError(f"void radius must lie in (0, 0.5), got {radius}")
    if not n_out > 0 or not a_out > 0:
        raise InvalidParameterError(f"matrix phase must be positive, got n={n_out}, a={a_out}")

    def inside(y1, y2):
        return (np.asarray(y1) - 0.5) ** 2 + (np.asarray(y2) - 0.5) ** 2 < radius ** 2

    def a_fn(y1, y2):
        return _scalar_a(np.where(inside(y1, y2), 1.0, a_out).astype(float))

    def n_fn(y1, y2):
        return np.where(inside(y1, y2), 1.0, n_out).astype(float)

    return CoefficientField(
        name=f'voids:{radius:g},{n_out:g},{a_out:g}', a_fn=a_fn, n_fn=n_fn, kind='piecewise',
        bounds=(min(1.0, a_out), max(1.0, a_out), min(1.0, n_out), max(1.0, n_out)),
        a_is_identity=(a_out == 1.0),
        params={'radius': radius, 'n_out': n_out, 'a_out': a_out})


def voids_anisotropic(radius=0.25, n_out=5.0, a_out=0.5):
    """Same index as `voids`, with A = a_out I in the matrix phase"""
    return voids(radius=radius, n_out=n_out, a_out=a_out)


def combine(a_source, n_source):
    """A from one field, n from another"""
    if a_source.epsilon != n_source.epsilon:
        raise InvalidParameterError("combined fields must share the same epsilon")
    kinds = {a_source.kind, n_source.kind}
    if 'piecewise' in kinds:
        kind = 'piecewise'
    elif 'smooth' in kinds:
        kind = 'smooth'
    else:
        kind = 'constant'
    return CoefficientField(
        name=f'{a_source.name}+{n_source.name}',
        a_fn=a_source.a_fn,
        n_fn=n_source.n_fn,
        kind=kind,
        bounds=(a_source.a_min, a_source.a_max, n_source.n_min, n_source.n_max),
        epsilon=a_source.epsilon,
        a_is_identity=a_source.a_is_identity,
        params={'a': dict(a_source.params), 'n': dict(n_source.params)},
    )


def quarter_turn(field):
    """y -> R A(R^T y) R^T, n(R^T y) with R the counterclockwise quarter turn"""

    def a_fn(y1, y2):
        # R^T y = (y2, -y1)
        b11, b12, b22 = field.a_fn(np.mod(y2, 1.0), np.mod(-np.asarray(y1), 1.0))
        return b22, -b12, b11

    def n_fn(y1, y2):
        return field.n_fn(np.mod(y2, 1.0), np.mod(-np.asarray(y1), 1.0))

    return replace(field, name=f'quarter-turn({field.name})', a_fn=a_fn, n_fn=n_fn)


PRESETS = {
    'constant': constant,
    'sincos-n': sincos_n,
    'sincos-A': sincos_a,
    'rotated-A': rotated_a,
    'layered-n': layered_n,
    'layered-A': layered_a,
    'checkerboard': checkerboard,
    'voids': voids,
    'voids-anisotropic': voids_anisotropic,
}

# exact cell means of n where they are known in closed form
ANALYTIC_MEANS = {
    'sincos-n': 3.0,
    'layered-n': 2.5,
}


def parse_preset(text):
    """
    Build a field from its textual form.

    "sincos-n", "constant:1,3", "checkerboard:1,4,2,5", "voids:0.25,5,1",
    "sincos-A+sincos-n" (A from the left preset, n from the right).
    """
    text = text.strip()
    if not text:
        raise InvalidParameterError("empty preset")
    if '+' in text:
        left, right = text.split('+', 1)
        return combine(parse_preset(left), parse_preset(right))
    name, _, args = text.partition(':')
    name = name.strip()
    if name not in PRESETS:
        raise InvalidParameterError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    values = []
    for part in args.split(','):
        if part.strip():
            try:
                values.append(float(part))
            except ValueError:
                raise InvalidParameterError(f"preset {name!r}: bad parameter {part!r}")
    try:
        return PRESETS[name](*values)
    except TypeError:
        raise InvalidParameterError(f"preset {name!r}: wrong number of parameters ({len(values)})")


# ---------------------------------------------------------------------------
# Checks and cell averages

def check_bounds(field, samples=10000, seed=0, tol=1e-12):
    """Sample the cell and report SPD/bounds violations; returns a dict of findings"""
    rng = np.random.default_rng(seed)
    points = rng.random((samples, 2))
    a = field.tensor(points * field.epsilon)
    n = field.index(points * field.epsilon)
    eig = np.linalg.eigvalsh(a)
    return {
        'samples': samples,
        'symmetric': bool(np.allclose(a, np.transpose(a, (0, 2, 1)))),
        'spd': bool(np.all(eig[:, 0] > 0)),
        'a_within': bool(np.all(eig[:, 0] >= field.a_min - tol) and np.all(eig[:, 1] <= field.a_max + tol)),
        'n_within': bool(np.all(n >= field.n_min - tol) and np.all(n <= field.n_max + tol)),
        'observed': (float(eig[:, 0].min()), float(eig[:, 1].max()), float(n.min()), float(n.max())),
    }


def check_periodicity(field, samples=101, tol=1e-12):
    """Compare opposite faces of the cell on a boundary sample grid"""
    t = np.linspace(0.0, 1.0, samples)
    eps = field.epsilon
    left = np.column_stack([np.zeros_like(t), t]) * eps
    right = np.column_stack([np.ones_like(t), t]) * eps
    bottom = np.column_stack([t, np.zeros_like(t)]) * eps
    top = np.column_stack([t, np.ones_like(t)]) * eps
    gaps = [
        np.abs(field.tensor(left) - field.tensor(right)).max(),
        np.abs(field.tensor(bottom) - field.tensor(top)).max(),
        np.abs(field.index(left) - field.index(right)).max(),
        np.abs(field.index(bottom) - field.index(top)).max(),
    ]
    return max(gaps) <= tol


def _component(field, component):
    if component == 'n':
        return lambda y1, y2: np.asarray(field.n_fn(y1, y2), dtype=float) * _ones(y1)

    def entries(y1, y2):
        a11, a12, a22 = (np.asarray(v, dtype=float) * _ones(y1) for v in field.a_fn(y1, y2))
        if component.startswith('ainv'):
            det = a11 * a22 - a12 * a12
            a11, a12, a22 = a22 / det, -a12 / det, a11 / det
            key = component[4:]
        else:
            key = component[1:]
        return {'11': a11, '12': a12, '21': a12, '22': a22}[key]

    if component not in ('a11', 'a12', 'a21', 'a22', 'ainv11', 'ainv12', 'ainv21', 'ainv22'):
        raise InvalidParameterError(f"unknown component {component!r}")
    return entries


def _gauss_on(func, lo, hi, y2, panels):
    edges = np.linspace(lo, hi, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes = a + half * (_GAUSS_X + 1.0)
        total += half * np.dot(_GAUSS_W, func(nodes, np.full_like(nodes, y2)))
    return total


def _jumps(func, y2):
    """Locations of the discontinuities of y1 -> func(y1, y2) on [0, 1]"""
    grid = np.linspace(0.0, 1.0, JUMP_SAMPLES)
    values = func(grid, np.full_like(grid, y2))
    changes = np.nonzero(values[1:] != values[:-1])[0]
    out = []
    for i in changes:
        lo, hi = grid[i], grid[i + 1]
        f_lo = func(np.array([lo]), np.array([y2]))[0]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if func(np.array([mid]), np.array([y2]))[0] == f_lo:
                lo = mid
            else:
                hi = mid
        out.append(0.5 * (lo + hi))
    return out


def cell_mean(field, component='n'):
    """
    Average of n (or of an entry of A or A^-1) over Y.

    Nested quadrature: adaptive Gauss-Kronrod in y2, composite Gauss-Legendre in y1.
    For piecewise fields the y1 line is split at its detected jumps first.
    """
    func = _component(field, component)
    if field.kind == 'constant':
        return float(func(np.array([0.5]), np.array([0.5]))[0])

    piecewise = field.kind == 'piecewise'

    def line(y2):
        if not piecewise:
            return _gauss_on(func, 0.0, 1.0, y2, GAUSS_PANELS)
        cuts = [0.0] + _jumps(func, y2) + [1.0]
        return sum(_gauss_on(func, a, b, y2, 1) for a, b in zip(cuts[:-1], cuts[1:]) if b > a)

    # cell-aligned piecewise layouts may also jump across y2 = 1/2
    points = (0.5,) if piecewise else None
    value, err = integrate.quad(line, 0.0, 1.0, points=points, limit=400,
                                epsabs=1e-12, epsrel=1e-12)
    logger.debug(f"cell mean of {component} for {field.name}: {value:.15g} (+/- {err:.1e})")
    return float(value)


def mean_tensor(field, inverse=False):
    """Cell average of A, or of A^-1 when inverse is set, as a 2x2 array"""
    prefix = 'ainv' if inverse else 'a'
    a11 = cell_mean(field, prefix + '11')
    a12 = cell_mean(field, prefix + '12')
    a22 = cell_mean(field, prefix + '22')
    return np.array([[a11, a12], [a12, a22]])


if __name__ == "__main__":
    for preset in ('sincos-n', 'layered-n', 'voids', 'checkerboard'):
        f = parse_preset(preset)
        print(f"{preset}: mean n = {cell_mean(f):.12f}, bounds = {f.bounds}")
