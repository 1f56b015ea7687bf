"""
Transmission Eigenvalue Solvers
Real interior transmission eigenvalues from the disk Bessel determinant, the two-field FEM pencil and the fourth-order fixed-point search, plus convergence-rate fits
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import optimize

from coeffs import constant
from config import CELLS_PER_PERIOD, DEFAULT_H_MAX, DEFAULT_TAU_STEPS, KNOWN_METHODS, worker_count
from errors import (DegenerateContrastError, DomainError, InvalidParameterError, RegimeError,
                    ToolkitError)
from linalg import eig_shift_invert, eig_symmetric_smallest
from mesh import Domain, assemble_mass, assemble_stiffness, lumped_mass, triangle_tensors
from specfun import ORDER_CEILING, bessel_j_array, bessel_jp_array

logger = logging.getLogger(__name__)

SCAN_STEP = 0.01
ROOT_XTOL = 1e-13
SHIFT_STEP = 0.05
RITZ_PER_SHIFT = 6
DEDUP_REL = 1e-6
CURVES_TRACKED = 8
SECANT_MAX_ITER = 50
SECANT_TOL = 1e-10
BRACKET_FEM_TOL = 0.02
FEM_DISPERSION = 0.1
BRACKET_HEADROOM = 1.5


@dataclass
class TEQuery:
    """Domain, (possibly rescaled) field, k-window and number of eigenvalues wanted"""

    domain: Domain
    field: object
    k_min: float
    k_max: float
    count: int = 1
    method: str = 'auto'
    h_max: float = None
    tau_steps: int = DEFAULT_TAU_STEPS
    strict_regime: bool = True

    def __post_init__(self):
        if isinstance(self.domain, str):
            self.domain = Domain.parse(self.domain)
        if not self.k_min > 0:
            raise InvalidParameterError(f"k_min must be positive, got {self.k_min}")
        if not self.k_max > self.k_min:
            raise InvalidParameterError(f"empty k-window ({self.k_min}, {self.k_max})")
        if self.count < 1:
            raise InvalidParameterError(f"count must be at least 1, got {self.count}")
        if self.method not in KNOWN_METHODS:
            raise InvalidParameterError(f"method must be one of {KNOWN_METHODS}, got {self.method!r}")
        if self.tau_steps < 2:
            raise InvalidParameterError(f"tau_steps must be at least 2, got {self.tau_steps}")

    @property
    def target_h(self):
        """Requested h, capped at epsilon / 8 for oscillating media"""
        h = self.h_max or DEFAULT_H_MAX
        if not self.field.is_constant:
            h = min(h, self.field.epsilon / CELLS_PER_PERIOD)
        return h

    def build_mesh(self):
        multiple = 1
        if not self.domain.is_disk and self.field.kind == 'piecewise':
            periods = (self.domain.hi - self.domain.lo) / self.field.epsilon
            if abs(periods - round(periods)) < 1e-9:
                multiple = 2 * int(round(periods))
        mesh = self.domain.build_mesh(self.target_h, multiple=multiple)
        logger.info(f"{mesh.summary()} for {self.field.name} (epsilon={self.field.epsilon:g})")
        return mesh


@dataclass
class TEResult:
    eigenvalues: list
    method: str
    residuals: list
    mesh_h: float = None
    shortfall: bool = False
    epsilon: float = None
    modes: list = field(default_factory=list, repr=False)
    mode_labels: tuple = ('w', 'v')
    mesh: object = field(default=None, repr=False)

    @property
    def is_empty(self):
        return not self.eigenvalues

    @property
    def k1(self):
        return self.eigenvalues[0] if self.eigenvalues else None

    def to_rows(self):
        return [{'method': self.method, 'epsilon': self.epsilon, 'k_index': j + 1, 'k_value': k,
                 'residual': r, 'h': self.mesh_h}
                for j, (k, r) in enumerate(zip(self.eigenvalues, self.residuals))]


@dataclass
class RateFit:
    epsilons: list
    k1_values: list
    reference: str
    p: float
    c: float
    k_ref: float = None
    x: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def to_dict(self):
        return {'reference': self.reference, 'k_ref': self.k_ref, 'p': self.p, 'c': self.c,
                'points': len(self.errors)}


# ---------------------------------------------------------------------------
# Analytic disk spectrum

def _check_disk_parameters(radius, a, n):
    for name, value in (('R', radius), ('a', a), ('n', n)):
        if not value > 0:
            raise InvalidParameterError(f"{name} must be positive, got {value}")
    if abs(n / a - 1.0) < 1e-14:
        raise DegenerateContrastError(f"n/a = 1 (a={a}, n={n}) has no transmission eigenvalues")


def det_disk(k, radius, a, n, order=0):
    """
    Order-m disk determinant; its zeros in k are the transmission eigenvalues of (aI, n) on B_R.

    Order 0 is J0(kR sqrt(n/a)) J1(kR) - sqrt(n a) J1(kR sqrt(n/a)) J0(kR); order m >= 1
    uses J_m(x_i) J_m'(x) - sqrt(n a) J_m'(x_i) J_m(x) with x = kR, x_i = kR sqrt(n/a).
    """
    _check_disk_parameters(radius, a, n)
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr <= 0):
        raise InvalidParameterError("k must be positive")
    x = np.atleast_1d(k_arr) * radius
    xi = x * math.sqrt(n / a)
    ratio = math.sqrt(n * a)
    if order == 0:
        value = bessel_j_array(0, xi) * bessel_j_array(1, x) - ratio * bessel_j_array(1, xi) * bessel_j_array(0, x)
    else:
        value = bessel_j_array(order, xi) * bessel_jp_array(order, x) - ratio * bessel_jp_array(order, xi) * bessel_j_array(order, x)
    return float(value[0]) if k_arr.ndim == 0 else value


def _sign_change_roots(func, k_min, k_max, step, limit=None):
    points = max(2, int(math.ceil((k_max - k_min) / step)) + 1)
    grid = np.linspace(k_min, k_max, points)
    values = func(grid)
    roots = []
    for i in range(points - 1):
        if values[i] == 0.0:
            if k_min < grid[i] < k_max:
                roots.append(float(grid[i]))
        elif values[i] * values[i + 1] < 0:
            roots.append(optimize.brentq(lambda t: float(func(np.array([t]))[0]), grid[i], grid[i + 1],
                                         xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=200))
        if limit is not None and len(roots) >= limit:
            break
    return roots


def roots_disk(radius, a, n, k_min, k_max, count=1, orders=(0,), step=SCAN_STEP, warn=True):
    """First `count` zeros of det_disk in (k_min, k_max), merged over the given angular orders"""
    _check_disk_parameters(radius, a, n)
    if not 0 < k_min < k_max:
        raise InvalidParameterError(f"bad k-window ({k_min}, {k_max})")
    step = min(step, SCAN_STEP)
    found = []
    for order in orders:
        roots = _sign_change_roots(lambda t, m=order: det_disk(t, radius, a, n, order=m), k_min, k_max, step, limit=count)
        found += [(r, order) for r in roots]
    found.sort()

    eigenvalues, residuals, used = [], [], []
    for value, order in found:
        if eigenvalues and abs(value - eigenvalues[-1]) <= 1e-9 * value:
            continue
        eigenvalues.append(value)
        residuals.append(abs(det_disk(value, radius, a, n, order=order)))
        used.append(order)
    shortfall = len(eigenvalues) < count
    if shortfall and warn:
        logger.warning(f"⚠️ only {len(eigenvalues)} of {count} disk roots in ({k_min}, {k_max}) "
                       f"for a={a}, n={n}, R={radius}")
    return TEResult(eigenvalues=eigenvalues[:count], method='analytic', residuals=residuals[:count],
                    shortfall=shortfall)


def disk_orders(radius, a, n, k_max):
    """Angular orders whose determinant can vanish below k_max"""
    top = k_max * radius * max(1.0, math.sqrt(n / a))
    return range(0, min(ORDER_CEILING - 1, int(math.ceil(top)) + 2) + 1)


def spectrum_disk(radius, a, n, k_min, k_max, count=1, warn=True):
    """First `count` eigenvalues of (aI, n) on B_R over every angular order"""
    return roots_disk(radius, a, n, k_min, k_max, count, orders=disk_orders(radius, a, n, k_max), warn=warn)


def _constant_parameters(medium):
    if not medium.is_constant:
        raise InvalidParameterError(f"analytic solver needs constant coefficients, got {medium.name}")
    return medium.params['a'], medium.params['n']


# ---------------------------------------------------------------------------
# Two-field pencil over X(D) = {(w, v): w - v in H1_0}

def _check_pencil_regime(medium, strict):
    if medium.a_min > 1.0 or medium.a_max < 1.0:
        return
    message = (f"A has eigenvalues in [{medium.a_min:g}, {medium.a_max:g}], which contains 1; "
               f"the pencil is outside its Fredholm regime")
    if strict:
        raise RegimeError(message)
    logger.warning(f"⚠️ {message}; continuing as requested")


def _pencil_maps(mesh):
    """Sparse maps x = (w, v_int) -> w and x -> v on all vertices"""
    n_vertices = mesh.n_vertices
    interior = mesh.interior
    n_interior = len(interior)
    size = n_vertices + n_interior
    take_w = sp.csr_matrix((np.ones(n_vertices), (np.arange(n_vertices), np.arange(n_vertices))),
                           shape=(n_vertices, size))
    rows = np.concatenate([mesh.boundary, interior])
    cols = np.concatenate([mesh.boundary, n_vertices + np.arange(n_interior)])
    take_v = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_vertices, size))
    return take_w, take_v


def assemble_pencil_X(mesh, medium, strict_regime=True):
    """
    K and M of size (V + I) for K x = k^2 M x.

    K = P^T diag(S_A, -S) P and M = P^T diag(M_n, -M_1) P, where P maps the unknowns to
    (w, v) on all vertices with v taking w's boundary values.
    """
    _check_pencil_regime(medium, strict_regime)
    return _pencil_matrices(mesh, medium)


def _pencil_matrices(mesh, medium):
    take_w, take_v = _pencil_maps(mesh)
    stiffness_a = assemble_stiffness(mesh, triangle_tensors(mesh, medium))
    stiffness = assemble_stiffness(mesh)
    mass_n = assemble_mass(mesh, medium)
    mass = assemble_mass(mesh)
    k = (take_w.T @ stiffness_a @ take_w - take_v.T @ stiffness @ take_v).tocsr()
    m = (take_w.T @ mass_n @ take_w - take_v.T @ mass @ take_v).tocsr()
    return k, m


def _dedup(values, rel=DEDUP_REL):
    """values: (lambda, payload) pairs sorted by lambda; keeps the lower-residual copy"""
    out = []
    for item in values:
        if out and abs(item[0] - out[-1][0]) <= rel * abs(item[0]):
            if item[1].residual < out[-1][1].residual:
                out[-1] = item
            continue
        out.append(item)
    return out


def solve_te_pencil(query, mesh=None):
    """Shift sweep over the k-window; every real k = sqrt(lambda) strictly inside it, ascending"""
    _check_pencil_regime(query.field, query.strict_regime)
    mesh = mesh or query.build_mesh()
    k_mat, m_mat = _pencil_matrices(mesh, query.field)

    steps = max(1, int(math.ceil((query.k_max - query.k_min) / SHIFT_STEP)))
    shifts = np.linspace(query.k_min, query.k_max, steps + 1) ** 2
    logger.info(f"pencil: {k_mat.shape[0]} unknowns, {len(shifts)} shifts")

    def sweep(shift):
        try:
            return eig_shift_invert(k_mat, m_mat, shift, RITZ_PER_SHIFT)
        except ToolkitError as e:
            logger.warning(f"⚠️ shift {shift:.6g} skipped: {e}")
            return []

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        batches = list(pool.map(sweep, shifts))

    lo, hi = query.k_min ** 2, query.k_max ** 2
    candidates = sorted(((r.value.real, r) for batch in batches for r in batch
                         if r.is_real and lo < r.value.real < hi), key=lambda item: item[0])
    kept = _dedup(candidates)

    eigenvalues = [math.sqrt(lam) for lam, _ in kept[:query.count]]
    residuals = [r.residual for _, r in kept[:query.count]]
    take_w, take_v = _pencil_maps(mesh)
    modes = [(take_w @ r.eigenvector, take_v @ r.eigenvector) for _, r in kept[:query.count]]

    shortfall = len(eigenvalues) < query.count
    if not eigenvalues:
        logger.warning(f"⚠️ no real transmission eigenvalue in ({query.k_min}, {query.k_max})")
    elif shortfall:
        logger.warning(f"⚠️ found {len(eigenvalues)} of {query.count} eigenvalues")
    return TEResult(eigenvalues=eigenvalues, method='pencil-X', residuals=residuals, mesh_h=mesh.h,
                    shortfall=shortfall, epsilon=query.field.epsilon, modes=modes, mesh=mesh)


# ---------------------------------------------------------------------------
# Fourth-order formulation for A = I

def _check_fourth_regime(medium):
    if not medium.a_is_identity:
        raise RegimeError(f"fourth-order formulation needs A = I, got {medium.name}")
    if not (medium.n_min > 1.0 or medium.n_max < 1.0):
        raise RegimeError(f"fourth-order formulation needs n_min > 1 or n_max < 1, "
                          f"got n in [{medium.n_min:g}, {medium.n_max:g}]")


def _vertex_index(mesh, medium):
    """n sampled once per vertex; piecewise fields are sampled just inside each triangle corner"""
    if medium.kind != 'piecewise':
        return medium.index(mesh.vertices), lumped_mass(mesh)
    areas, _ = mesh.geometry()
    corners = mesh.vertices[mesh.triangles]
    pulled = 0.5 * corners + 0.5 * corners.mean(axis=1, keepdims=True)
    values = medium.index(pulled.reshape(-1, 2)).reshape(-1, 3)
    return values, np.repeat(areas / 3.0, 3).reshape(-1, 3)


class FourthOrderPencil:
    """
    Mixed P1/P1 discretization of A_tau u = lambda B u on H2_0.

    sigma = G u approximates the Laplacian through the lumped mass (G = -L^-1 S[:, I]).
    For n > 1, A_tau = (G + tau E)^T W (G + tau E) + tau^2 L_II with W = L / (n - 1);
    for n < 1 the weight is n / (1 - n) and G^T L G replaces the tau^2 term.
    """

    def __init__(self, mesh, medium):
        _check_fourth_regime(medium)
        self.mesh = mesh
        self.above = medium.n_min > 1.0
        interior = mesh.interior
        n_vertices = mesh.n_vertices
        stiffness = assemble_stiffness(mesh)
        lumped = lumped_mass(mesh)

        self.extend = sp.csr_matrix((np.ones(len(interior)), (interior, np.arange(len(interior)))),
                                    shape=(n_vertices, len(interior)))
        self.laplacian = (-sp.diags(1.0 / lumped) @ stiffness[:, interior]).tocsr()
        self.b = stiffness[interior][:, interior].tocsr()
        self.lumped_interior = sp.diags(lumped[interior])

        values, weights = _vertex_index(mesh, medium)
        if self.above:
            factor = weights / (values - 1.0)
        else:
            factor = weights * values / (1.0 - values)
        if medium.kind == 'piecewise':
            factor = np.bincount(mesh.triangles.ravel(), weights=factor.ravel(), minlength=n_vertices)
        self.weight = sp.diags(factor)
        self.bilaplacian = (self.laplacian.T @ sp.diags(lumped) @ self.laplacian).tocsr()

    def operator(self, tau):
        shifted = self.laplacian + tau * self.extend
        a = shifted.T @ self.weight @ shifted
        if self.above:
            a = a + tau * tau * self.lumped_interior
        else:
            a = a + self.bilaplacian
        return sp.csr_matrix(a)

    def curves(self, tau, count=CURVES_TRACKED):
        values, _ = eig_symmetric_smallest(self.operator(tau), self.b, count)
        return values

    def mode(self, tau, j):
        _, vectors = eig_symmetric_smallest(self.operator(tau), self.b, j + 1)
        u = self.extend @ vectors[:, j]
        return u, self.laplacian @ vectors[:, j]


def _illinois(g, a, b, ga, gb):
    """Safeguarded secant (Illinois) on a sign-change bracket; None when it does not settle"""
    side = 0
    for _ in range(SECANT_MAX_ITER):
        c = (a * gb - b * ga) / (gb - ga)
        gc = g(c)
        if abs(gc) <= SECANT_TOL * max(1.0, abs(c)) or abs(b - a) <= SECANT_TOL * max(1.0, abs(c)):
            return c, abs(gc)
        if gc * gb < 0:
            a, ga = b, gb
            b, gb = c, gc
            side = 0
        else:
            b, gb = c, gc
            if side == 1:
                ga *= 0.5
            side = 1
    return None, None


def _fourth_window(query):
    """Narrow a single-eigenvalue search on a disk to the constant-coefficient bracket"""
    medium = query.field
    if query.count != 1 or not query.domain.is_disk or medium.is_constant:
        return query.k_min, query.k_max
    try:
        radius = query.domain.radius
        lo = spectrum_disk(radius, 1.0, medium.n_max, query.k_min, query.k_max, 1, warn=False).k1
        hi = spectrum_disk(radius, 1.0, medium.n_min, query.k_min, query.k_max, 1, warn=False).k1
    except ToolkitError:
        return query.k_min, query.k_max
    if lo is None or hi is None:
        return query.k_min, query.k_max
    lo, hi = min(lo, hi), max(lo, hi)
    return max(query.k_min, 0.98 * lo), min(query.k_max, 1.02 * hi)


def solve_te_4th(query, mesh=None):
    """Roots of lambda_j(tau) - tau over the tau-scan for j <= 8; k = sqrt(tau)"""
    medium = query.field
    _check_fourth_regime(medium)
    mesh = mesh or query.build_mesh()
    pencil = FourthOrderPencil(mesh, medium)

    k_lo, k_hi = _fourth_window(query)
    taus = np.linspace(k_lo ** 2, k_hi ** 2, query.tau_steps + 1)
    logger.info(f"fourth-order: {pencil.b.shape[0]} unknowns, tau scan over "
                f"[{taus[0]:.4g}, {taus[-1]:.4g}] with {len(taus)} points")
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        table = np.array(list(pool.map(pencil.curves, taus)))
    tracked = table.shape[1]
    gaps = table - taus[:, None]

    roots = []
    for j in range(tracked):
        def g(tau, j=j):
            return pencil.curves(tau, tracked)[j] - tau

        for i in np.nonzero(gaps[:-1, j] * gaps[1:, j] < 0)[0]:
            tau, residual = _illinois(g, taus[i], taus[i + 1], gaps[i, j], gaps[i + 1, j])
            if tau is None:
                logger.warning(f"⚠️ secant search on curve {j + 1} near tau={taus[i]:.6g} did not "
                               f"converge in {SECANT_MAX_ITER} iterations; value dropped")
                continue
            roots.append((tau, residual / tau, j))
    roots.sort()

    kept = []
    for tau, residual, j in roots:
        k = math.sqrt(tau)
        if not query.k_min < k < query.k_max:
            continue
        if kept and abs(k - kept[-1][0]) <= 1e-8 * k:
            continue
        kept.append((k, residual, tau, j))
    kept = kept[:query.count]

    shortfall = len(kept) < query.count
    if shortfall:
        logger.warning(f"⚠️ found {len(kept)} of {query.count} eigenvalues in ({query.k_min}, {query.k_max})")
    return TEResult(eigenvalues=[k for k, _, _, _ in kept], method='fixed-point-4th',
                    residuals=[r for _, r, _, _ in kept], mesh_h=mesh.h, shortfall=shortfall,
                    epsilon=medium.epsilon, modes=[pencil.mode(tau, j) for _, _, tau, j in kept],
                    mode_labels=('u', 'sigma'), mesh=mesh)


# ---------------------------------------------------------------------------
# Dispatch

def choose_method(query):
    medium = query.field
    if query.method != 'auto':
        return query.method
    if medium.is_constant and query.domain.is_disk:
        return 'analytic'
    if medium.a_is_identity and (medium.n_min > 1.0 or medium.n_max < 1.0):
        return 'fourth'
    return 'pencil'


def solve_te(query, mesh=None):
    method = choose_method(query)
    if method == 'analytic':
        if not query.domain.is_disk:
            raise DomainError("the analytic solver is only available on disks")
        a, n = _constant_parameters(query.field)
        return spectrum_disk(query.domain.radius, a, n, query.k_min, query.k_max, query.count)
    if method == 'fourth':
        return solve_te_4th(query, mesh)
    return solve_te_pencil(query, mesh)


def solve_many(queries):
    """Independent queries, results in input order"""
    return [solve_te(q) for q in queries]


# ---------------------------------------------------------------------------
# Bracket checks

@dataclass
class BracketReport:
    rule: str
    lower: list
    upper: list
    satisfied: list

    @property
    def applicable(self):
        return self.rule != 'none'

    @property
    def all_satisfied(self):
        return all(self.satisfied)


def _comparison(domain, a, n, count, k_max, mesh_h):
    """First `count` eigenvalues for the constant medium (aI, n)"""
    if domain.is_disk:
        return spectrum_disk(domain.radius, a, n, 1e-3, k_max, count, warn=False).eigenvalues
    query = TEQuery(domain=domain, field=constant(a, n), k_min=1e-2, k_max=k_max, count=count,
                    h_max=mesh_h, method='fourth' if a == 1.0 else 'pencil')
    return solve_te(query).eigenvalues


def fem_tolerance(k, h):
    """Relative slack for a P1 eigenvalue at wavenumber k on a mesh of size h"""
    if h is None:
        return BRACKET_FEM_TOL
    return max(BRACKET_FEM_TOL, FEM_DISPERSION * (k * h) ** 2)


def bracket_check(result, medium, domain, tol=None):
    """
    Compare each eigenvalue with the constant-coefficient comparison values.

    A = I, n_min > 1: k(n_max) <= k < k(n_min). n = 1: k lies between k(a_min) and k(a_max).
    a_max < 1, n_min > 1: k lies between k(a_min, n_max) and k(a_max, n_min).
    """
    if isinstance(domain, str):
        domain = Domain.parse(domain)
    count = len(result.eigenvalues)
    if count == 0:
        return BracketReport(rule='none', lower=[], upper=[], satisfied=[])

    if medium.a_is_identity and medium.n_min > 1.0:
        rule, first, second = 'index', (1.0, medium.n_max), (1.0, medium.n_min)
    elif medium.n_min == medium.n_max == 1.0 and (medium.a_max < 1.0 or medium.a_min > 1.0):
        rule, first, second = 'tensor', (medium.a_min, 1.0), (medium.a_max, 1.0)
    elif medium.a_max < 1.0 and medium.n_min > 1.0:
        rule, first, second = 'mixed', (medium.a_min, medium.n_max), (medium.a_max, medium.n_min)
    else:
        return BracketReport(rule='none', lower=[], upper=[], satisfied=[])

    k_top = max(result.eigenvalues)
    if tol is None:
        tol = 1e-9 if result.method == 'analytic' else fem_tolerance(k_top, result.mesh_h)
    # a comparison root beyond the cap lies above every eigenvalue checked
    k_cap = BRACKET_HEADROOM * k_top * (1.0 + tol)
    one = _comparison(domain, *first, count, k_cap, result.mesh_h)
    two = _comparison(domain, *second, count, k_cap, result.mesh_h)
    lower, upper, satisfied = [], [], []
    for j, k in enumerate(result.eigenvalues):
        pair = sorted(values[j] if j < len(values) else math.inf for values in (one, two))
        lo, hi = pair
        lower.append(lo if lo < math.inf else None)
        upper.append(hi if hi < math.inf else None)
        satisfied.append(bool(lo * (1.0 - tol) <= k <= hi * (1.0 + tol)))
    report = BracketReport(rule=rule, lower=lower, upper=upper, satisfied=satisfied)
    if not report.all_satisfied:
        logger.warning(f"⚠️ bracket ({rule}) violated for {medium.name}: {result.eigenvalues} vs "
                       f"[{lower}, {upper}]")
    return report


# ---------------------------------------------------------------------------
# Convergence rates

def fit_rate(epsilons, k1s, k_ref=None):
    """
    Least-squares slope p of log(error) against log(epsilon).

    With k_ref the error is |k1(eps) - k_ref|; without it, epsilons must halve and the
    error is |k1(eps) - k1(eps/2)| / k1(eps/2) at eps.
    """
    epsilons = [float(e) for e in epsilons]
    k1s = [float(k) for k in k1s]
    if len(epsilons) != len(k1s) or len(epsilons) < 3:
        raise InvalidParameterError(f"fit_rate needs at least 3 matching points, got "
                                    f"{len(epsilons)} epsilons and {len(k1s)} values")
    if k_ref is not None:
        reference = 'k_h'
        x = epsilons
        errors = [abs(k - k_ref) for k in k1s]
    else:
        reference = 'successive-relative'
        for big, small in zip(epsilons[:-1], epsilons[1:]):
            if abs(small - 0.5 * big) > 1e-9 * big:
                raise InvalidParameterError(f"relative-error rates need a halving chain, got {epsilons}")
        x = epsilons[:-1]
        errors = [abs(k1s[i] - k1s[i + 1]) / k1s[i + 1] for i in range(len(k1s) - 1)]

    points = [(e, err) for e, err in zip(x, errors) if err > 0]
    if len(points) < len(errors):
        logger.warning(f"⚠️ excluded {len(errors) - len(points)} point(s) with zero error from the rate fit")
    if len(points) < 2:
        raise InvalidParameterError("fewer than two nonzero errors left for the rate fit")
    log_x = np.log([e for e, _ in points])
    log_err = np.log([err for _, err in points])
    p, c = np.polyfit(log_x, log_err, 1)
    return RateFit(epsilons=epsilons, k1_values=k1s, reference=reference, p=float(p), c=float(c),
                   k_ref=k_ref, x=[e for e, _ in points], errors=[err for _, err in points])


# ---------------------------------------------------------------------------
# Raw eigenfunction export

def export_mode(result, path, index=0):
    """One line per vertex: x, y and the two mode fields"""
    if result.mesh is None or index >= len(result.modes):
        raise InvalidParameterError("result carries no eigenfunction to export")
    first, second = result.modes[index]
    data = np.column_stack([result.mesh.vertices, first, second])
    header = f"x y {result.mode_labels[0]} {result.mode_labels[1]}  k={result.eigenvalues[index]:.12g}"
    np.savetxt(path, data, fmt='%.12g', header=header)
    logger.info(f"mode {index + 1} written to {path}")
    return path


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    for radius, a, n in ((2.0, 1.0, 3.0), (2.0, 0.5, 3.0), (1.0, 0.5, 1.5)):
        res = roots_disk(radius, a, n, 0.5, 10.0, 1)
        full = spectrum_disk(radius, a, n, 0.5, 10.0, 1)
        if res.k1 is None:
            print(f"R={radius} a={a} n={n}: no order-0 root in (0.5, 10)")
            continue
        print(f"R={radius} a={a} n={n}: order-0 k1 = {res.k1:.10f}, all orders k1 = {full.k1:.10f}")
