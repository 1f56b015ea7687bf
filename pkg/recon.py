"""
Effective Property Reconstruction
Inverts a measured first transmission eigenvalue for a constant index n_h, a scalar tensor a_h, or the ratio n_h/a_h
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from coeffs import constant
from config import KNOWN_BRANCHES, KNOWN_MODES
from errors import DomainError, InvalidParameterError, MonotonicityError, OutOfRangeError, ToolkitError
from mesh import Domain
from te_solver import TEQuery, roots_disk, solve_te_4th, solve_te_pencil

logger = logging.getLogger(__name__)

INDEX_BRACKET = (1.0 + 1e-6, 100.0)
TENSOR_BRACKETS = {'below': (1e-3, 1.0 - 1e-6), 'above': (1.0 + 1e-6, 100.0)}
K_FLOOR = 0.01
MONOTONE_GRID = 50
PARAMETER_TOL = 1e-12
MAX_BISECTIONS = 100
CONVERGED_RESIDUAL = 1e-8
FEM_PARAMETER_TOL = 1e-6
FEM_MAX_BISECTIONS = 40
FEM_TAU_STEPS = 60
SURROGATE_SPREAD = 1.5


@dataclass
class ReconstructionReport:
    measured_k1: float
    mode: str
    recovered: float
    residual: float
    bracket: tuple
    converged: bool
    branch: str = None
    domain: str = None
    forward_evaluations: int = 0
    derived: dict = field(default_factory=dict)

    def to_dict(self):
        row = {
            'mode': self.mode,
            'measured_k1': self.measured_k1,
            'recovered': self.recovered,
            'residual': self.residual,
            'bracket_lo': self.bracket[0],
            'bracket_hi': self.bracket[1],
            'converged': self.converged,
            'branch': self.branch,
            'domain': self.domain,
        }
        row.update(self.derived)
        return row


def _disk_radius(radius):
    if isinstance(radius, str):
        radius = Domain.parse(radius)
    if isinstance(radius, Domain):
        if not radius.is_disk:
            raise DomainError(f"analytic inversion needs a disk, got {radius.to_text()}")
        return radius.radius
    if not radius > 0:
        raise InvalidParameterError(f"radius must be positive, got {radius}")
    return float(radius)


def _first_root(radius, a, n, cap):
    """First order-0 root below cap, or inf"""
    if abs(n / a - 1.0) < 1e-14:
        return math.inf
    result = roots_disk(radius, a, n, K_FLOOR, cap, 1, warn=False) if cap > K_FLOOR else None
    return result.k1 if result is not None and result.k1 is not None else math.inf


def _check_monotone(values, decreasing, label):
    finite = [v for v in values if math.isfinite(v)]
    steps = np.diff(finite)
    ordered = np.all(steps < 0) if decreasing else np.all(steps > 0)
    # infinities may only sit at the end where the map runs past the cap
    infinite = np.array([not math.isfinite(v) for v in values], dtype=int)
    jumps = np.diff(infinite)
    ordered = ordered and bool(np.all(jumps <= 0) if decreasing else np.all(jumps >= 0))
    if not ordered:
        raise MonotonicityError(f"{label}: forward map is not monotone on the bracket grid; "
                                f"refusing to bisect")


def _bisect(forward, k1, bracket, decreasing, label, tol=PARAMETER_TOL, max_steps=MAX_BISECTIONS):
    lo, hi = bracket
    f_lo, f_hi = forward(lo), forward(hi)
    evaluations = 2
    low_end, high_end = (f_hi, f_lo) if decreasing else (f_lo, f_hi)
    if not low_end <= k1 <= high_end:
        raise OutOfRangeError(f"{label}: k1 = {k1} is outside the achievable range "
                              f"[{low_end:.6g}, {high_end:.6g}] over [{lo:g}, {hi:g}]")
    for _ in range(max_steps):
        if hi - lo <= tol * max(1.0, abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        value = forward(mid)
        evaluations += 1
        if (value > k1) == decreasing:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), evaluations


def _invert_analytic(k1, radius, mode, bracket, forward, decreasing, branch=None):
    if not k1 > 0:
        raise InvalidParameterError(f"k1 must be positive, got {k1}")
    radius = _disk_radius(radius)
    label = f"{mode} inversion of k1={k1}"
    grid = np.linspace(bracket[0], bracket[1], MONOTONE_GRID)
    _check_monotone([forward(radius, p, k1) for p in grid], decreasing, label)

    recovered, evaluations = _bisect(lambda p: forward(radius, p, k1), k1, bracket, decreasing, label)
    achieved = forward(radius, recovered, k1)
    residual = abs(achieved - k1) if math.isfinite(achieved) else math.inf
    converged = residual <= CONVERGED_RESIDUAL
    if not converged:
        logger.warning(f"⚠️ {label}: residual {residual:.2e} after bisection")
    logger.info(f"{label} on B_{radius:g}: recovered {recovered:.10g}")
    return ReconstructionReport(measured_k1=k1, mode=mode, recovered=recovered, residual=residual,
                                bracket=tuple(bracket), converged=converged, branch=branch,
                                domain=f'disk:{radius:g}', forward_evaluations=evaluations + MONOTONE_GRID)


def _index_forward(radius, n, k1):
    return _first_root(radius, 1.0, n, 2.0 * k1 + 1.0)


def _tensor_forward(radius, a, k1):
    return _first_root(radius, a, 1.0, 2.0 * k1 + 1.0)


def invert_index(k1, radius=1.0):
    """n* > 1 whose first disk root with A = I equals k1"""
    return _invert_analytic(k1, radius, 'index', INDEX_BRACKET, _index_forward, decreasing=True)


def invert_tensor_scalar(k1, radius=1.0, branch='below'):
    """a* with n = 1; branch 'below' searches a < 1, 'above' a > 1"""
    if branch not in KNOWN_BRANCHES:
        raise InvalidParameterError(f"branch must be one of {KNOWN_BRANCHES}, got {branch!r}")
    # k1 grows as a approaches 1 from either side
    return _invert_analytic(k1, radius, 'tensor', TENSOR_BRACKETS[branch], _tensor_forward,
                            decreasing=(branch == 'above'), branch=branch)


def invert_ratio(k1, radius=1.0, known_index=None):
    """
    alpha* = n_h / a_h from the model with the normal-derivative jump dropped.

    Its determinant J0(kR sqrt(alpha)) J1(kR) - sqrt(alpha) J1(kR sqrt(alpha)) J0(kR) is the
    disk determinant with a = 1, n = alpha. With known_index, a_h = n_h / alpha is derived.
    """
    report = _invert_analytic(k1, radius, 'ratio', INDEX_BRACKET, _index_forward, decreasing=True)
    if known_index is not None:
        report.derived = {'n_h': known_index, 'a_h': known_index / report.recovered}
    return report


# ---------------------------------------------------------------------------
# Square domains with the FEM forward map

def _fem_forward(domain, mode, h_max, k1):
    mesh_cache = {}

    def forward(p):
        if mode == 'tensor':
            medium, solver = constant(p, 1.0), solve_te_pencil
        else:
            medium, solver = constant(1.0, p), solve_te_4th
        query = TEQuery(domain=domain, field=medium, k_min=0.5 * k1, k_max=1.6 * k1, count=1,
                        h_max=h_max, tau_steps=FEM_TAU_STEPS)
        if 'mesh' not in mesh_cache:
            mesh_cache['mesh'] = query.build_mesh()
        try:
            result = solver(query, mesh_cache['mesh'])
        except ToolkitError as e:
            logger.warning(f"⚠️ FEM forward solve at {p:.8g} failed: {e}")
            return math.inf
        return result.k1 if result.k1 is not None else math.inf

    return forward


def invert_fem(mode, k1, domain, h_max=None, branch='below', known_index=None):
    """
    Inversion on a non-disk domain with the FEM eigenvalue as forward map.

    The bracket starts from the analytic answer on the disk of equal area.
    """
    if mode not in KNOWN_MODES:
        raise InvalidParameterError(f"mode must be one of {KNOWN_MODES}, got {mode!r}")
    if isinstance(domain, str):
        domain = Domain.parse(domain)
    if not k1 > 0:
        raise InvalidParameterError(f"k1 must be positive, got {k1}")
    surrogate_radius = domain.equivalent_radius
    if mode == 'tensor':
        limits = TENSOR_BRACKETS[branch]
        surrogate = invert_tensor_scalar(k1, surrogate_radius, branch)
        decreasing = branch == 'above'
    else:
        limits = INDEX_BRACKET
        surrogate = invert_index(k1, surrogate_radius)
        decreasing = True

    guess = surrogate.recovered
    if mode == 'tensor' and branch == 'below':
        bracket = (max(limits[0], guess / SURROGATE_SPREAD), min(limits[1], 0.5 * (guess + 1.0)))
    else:
        bracket = (max(limits[0], 1.0 + (guess - 1.0) / SURROGATE_SPREAD),
                   min(limits[1], 1.0 + (guess - 1.0) * SURROGATE_SPREAD))
    logger.info(f"FEM {mode} inversion on {domain.to_text()}: surrogate {guess:.6g}, bracket "
                f"[{bracket[0]:.6g}, {bracket[1]:.6g}]")

    forward = _fem_forward(domain, mode, h_max, k1)
    label = f"FEM {mode} inversion of k1={k1}"
    try:
        recovered, evaluations = _bisect(forward, k1, bracket, decreasing, label,
                                         tol=FEM_PARAMETER_TOL, max_steps=FEM_MAX_BISECTIONS)
    except OutOfRangeError:
        logger.warning(f"⚠️ {label}: surrogate bracket missed the root; widening to {limits}")
        bracket = limits
        recovered, evaluations = _bisect(forward, k1, bracket, decreasing, label,
                                         tol=FEM_PARAMETER_TOL, max_steps=FEM_MAX_BISECTIONS)
    achieved = forward(recovered)
    residual = abs(achieved - k1) if math.isfinite(achieved) else math.inf
    report = ReconstructionReport(measured_k1=k1, mode=mode, recovered=recovered, residual=residual,
                                  bracket=bracket, converged=residual <= 1e-5 * k1,
                                  branch=branch if mode == 'tensor' else None,
                                  domain=domain.to_text(), forward_evaluations=evaluations + 1)
    if mode == 'ratio' and known_index is not None:
        report.derived = {'n_h': known_index, 'a_h': known_index / recovered}
    return report


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    print(invert_index(5.046).to_dict())
    print(invert_tensor_scalar(7.349).to_dict())
    print(invert_ratio(2.5415).to_dict())
