"""
Far-Field Scattering and Linear Sampling
Far-field data for penetrable disks, Tikhonov-Morozov solution of the far-field equation and transmission eigenvalue detection from norm spikes
"""

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.ndimage import median_filter
from scipy.stats import qmc

from config import (DEFAULT_DIRECTIONS, DEFAULT_K_STEP, DEFAULT_NOISE, DEFAULT_NUM_Z, DEFAULT_SEED,
                    DEFAULT_SPIKE_FACTOR, KNOWN_NORMS, worker_count)
from errors import InvalidParameterError, NumericalResonanceError
from linalg import svd_dense
from mesh import Domain
from specfun import cylinder_tables

logger = logging.getLogger(__name__)

EXTRA_MODES = 20
RESONANCE_TOL = 1e-14
RESONANCE_NUDGE = 1e-12
LOG_ALPHA_RANGE = (-14.0, 2.0)
NOISE_FREE_ALPHA = 1e-10
BISECTION_STEPS = 60
SAMPLING_SHRINK = 0.8
SPIKE_NEIGHBORS = 3
SPIKE_FLOOR = 1.5
TREND_HALF_WIDTH = 25
SPREAD_FLOOR = 1e-3
RADIAL_NODES = 24
SQUARE_NODES = 48
VALID_DIRECTIONS = (16, 32, 64, 128, 256)


@dataclass
class FarFieldMatrix:
    """u_inf(theta_i, phi_j) on uniform grids; operator() is the trapezoid-weighted F"""

    k: float
    thetas: np.ndarray
    phis: np.ndarray
    entries: np.ndarray
    delta: float = 0.0
    _svd: object = field(default=None, repr=False)

    @property
    def directions(self):
        return len(self.phis)

    @property
    def is_degenerate(self):
        return not np.any(self.entries)

    def operator(self):
        return (2.0 * math.pi / self.directions) * self.entries

    def svd(self):
        if self._svd is None:
            self._svd = svd_dense(self.operator())
        return self._svd

    def to_rows(self):
        rows = []
        for i, theta in enumerate(self.thetas):
            for j, phi in enumerate(self.phis):
                value = self.entries[i, j]
                rows.append({'theta': theta, 'phi': phi, 're': value.real, 'im': value.imag})
        return rows


def uniform_angles(count):
    return 2.0 * math.pi * np.arange(count) / count


def _check_directions(count):
    if count not in VALID_DIRECTIONS:
        raise InvalidParameterError(f"direction count must be a power of two in [16, 256], got {count}")


def _scattering_coefficients(k, radius, a, n, modes):
    """beta_m for the incident J_m, orders 0..modes; None when a mode is resonant"""
    k_inner = k * math.sqrt(n / a)
    j_in, jp_in, _, _ = cylinder_tables(modes, k_inner * radius)
    j_out, jp_out, y_out, yp_out = cylinder_tables(modes, k * radius)
    h_out = j_out + 1j * y_out
    hp_out = jp_out + 1j * yp_out
    # c J_m(k_i R) - beta H_m(kR) = J_m(kR);  a k_i c J_m'(k_i R) - k beta H_m'(kR) = k J_m'(kR)
    m11, m12 = j_in, -h_out
    m21, m22 = a * k_inner * jp_in, -k * hp_out
    det = m11 * m22 - m12 * m21
    scale = np.abs(m11 * m22) + np.abs(m12 * m21)
    if np.any(np.abs(det) <= RESONANCE_TOL * scale):
        return None
    return (m11 * (k * jp_out) - m21 * j_out) / det


def farfield_disk(k, radius, a, n, directions=DEFAULT_DIRECTIONS, modes=None):
    """
    Far-field matrix of the disk B_R with constant (aI, n) by separation of variables.

    u_inf(theta, phi) = sqrt(2 / (pi k)) e^{-i pi/4} (beta_0 + 2 sum beta_m cos(m (theta - phi)))
    truncated at M = ceil(kR) + 20 unless `modes` is given.
    """
    for name, value in (('k', k), ('R', radius), ('a', a), ('n', n)):
        if not value > 0:
            raise InvalidParameterError(f"{name} must be positive, got {value}")
    _check_directions(directions)
    angles = uniform_angles(directions)
    if a == 1.0 and n == 1.0:
        return FarFieldMatrix(k=k, thetas=angles, phis=angles,
                              entries=np.zeros((directions, directions), dtype=complex))
    if modes is None:
        modes = int(math.ceil(k * radius)) + EXTRA_MODES

    beta = _scattering_coefficients(k, radius, a, n, modes)
    if beta is None:
        logger.warning(f"⚠️ resonant mode at k={k:.12g}; retrying at k + {RESONANCE_NUDGE:g}")
        beta = _scattering_coefficients(k + RESONANCE_NUDGE, radius, a, n, modes)
        if beta is None:
            raise NumericalResonanceError(f"transmission match singular at k={k:.12g}")

    orders = np.arange(1, modes + 1)
    profile = beta[0] + 2.0 * np.cos(np.outer(angles, orders)) @ beta[1:]
    profile *= math.sqrt(2.0 / (math.pi * k)) * cmath.exp(-0.25j * math.pi)
    offsets = (np.arange(directions)[:, None] - np.arange(directions)[None, :]) % directions
    return FarFieldMatrix(k=k, thetas=angles, phis=angles, entries=profile[offsets])


def add_noise(matrix, delta, rng):
    """Entrywise F (1 + delta zeta) with zeta uniform on the unit disk"""
    if delta == 0:
        return matrix
    shape = matrix.entries.shape
    zeta = np.sqrt(rng.random(shape)) * np.exp(2j * math.pi * rng.random(shape))
    return FarFieldMatrix(k=matrix.k, thetas=matrix.thetas, phis=matrix.phis,
                          entries=matrix.entries * (1.0 + delta * zeta), delta=delta)


def farfield_point_source(k, z, thetas):
    """Far field of the fundamental solution centred at z"""
    z = np.asarray(z, dtype=float)
    gamma = cmath.exp(0.25j * math.pi) / math.sqrt(8.0 * math.pi * k)
    return gamma * np.exp(-1j * k * (np.cos(thetas) * z[0] + np.sin(thetas) * z[1]))


# ---------------------------------------------------------------------------
# Herglotz waves

def herglotz_field(g, k, points, phis=None):
    """v_g(x) = int g(phi) e^{ik x.d(phi)} dphi by the trapezoid rule"""
    g = np.asarray(g)
    phis = uniform_angles(len(g)) if phis is None else phis
    points = np.atleast_2d(points)
    phase = np.outer(points[:, 0], np.cos(phis)) + np.outer(points[:, 1], np.sin(phis))
    return (2.0 * math.pi / len(g)) * (np.exp(1j * k * phase) @ g)


@lru_cache(maxsize=32)
def _domain_quadrature(domain, directions):
    if domain.is_disk:
        nodes, weights = np.polynomial.legendre.leggauss(RADIAL_NODES)
        r = 0.5 * domain.radius * (nodes + 1.0)
        wr = 0.5 * domain.radius * weights * r
        count = 4 * directions
        t = uniform_angles(count)
        rr, tt = np.meshgrid(r, t, indexing='ij')
        points = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
        return points, np.repeat(wr, count) * (2.0 * math.pi / count)
    nodes, weights = np.polynomial.legendre.leggauss(SQUARE_NODES)
    half = 0.5 * (domain.hi - domain.lo)
    x = domain.lo + half * (nodes + 1.0)
    w = half * weights
    xx, yy = np.meshgrid(x, x, indexing='ij')
    return np.column_stack([xx.ravel(), yy.ravel()]), np.outer(w, w).ravel()


def herglotz_norm(g, k, domain):
    """L2(D) norm of v_g; disks use a polar Gauss x uniform grid, squares a Gauss tensor grid"""
    if isinstance(domain, str):
        domain = Domain.parse(domain)
    g = np.asarray(g)
    if not np.any(g):
        return 0.0
    points, weights = _domain_quadrature(domain, len(g))
    values = herglotz_field(g, k, points)
    return float(math.sqrt(np.sum(weights * np.abs(values) ** 2)))


def density_norm(g):
    """||g||_{L2(0, 2 pi)} by the trapezoid rule"""
    g = np.asarray(g)
    return float(math.sqrt(2.0 * math.pi / len(g) * np.sum(np.abs(g) ** 2)))


# ---------------------------------------------------------------------------
# Regularized far-field equation

def tikhonov_solve(svd, rhs, alpha):
    """g_alpha = V diag(s / (s^2 + alpha)) U^H rhs"""
    coefficients = svd.u.conj().T @ rhs
    return svd.vh.conj().T @ (svd.s / (svd.s ** 2 + alpha) * coefficients)


def discrepancy(svd, rhs, alpha):
    """||F g_alpha - rhs|| from the filter factors alone"""
    coefficients = svd.u.conj().T @ rhs
    outside = max(np.linalg.norm(rhs) ** 2 - np.linalg.norm(coefficients) ** 2, 0.0)
    inside = np.sum((alpha / (svd.s ** 2 + alpha)) ** 2 * np.abs(coefficients) ** 2)
    return float(math.sqrt(inside + outside))


def tikhonov_morozov(matrix, z, delta, rhs=None):
    """
    Minimize ||F g - Phi_inf(., z)||^2 + alpha ||g||^2 with alpha from Morozov's principle.

    Returns (g, alpha, warning). Bisection on log10(alpha) over [-14, 2] solves
    ||F g - Phi|| = delta ||F|| ||g||; delta = 0 fixes alpha = 1e-10. When the equation has
    no root in the range, the nearer end is used and warning is set.
    """
    svd = matrix.svd()
    if rhs is None:
        rhs = farfield_point_source(matrix.k, z, matrix.thetas)
    if delta == 0:
        return tikhonov_solve(svd, rhs, NOISE_FREE_ALPHA), NOISE_FREE_ALPHA, False

    level = delta * svd.norm

    def morozov(log_alpha):
        alpha = 10.0 ** log_alpha
        g = tikhonov_solve(svd, rhs, alpha)
        return discrepancy(svd, rhs, alpha) - level * np.linalg.norm(g)

    lo, hi = LOG_ALPHA_RANGE
    f_lo, f_hi = morozov(lo), morozov(hi)
    if f_lo > 0 or f_hi < 0:
        end = lo if f_lo > 0 else hi
        logger.debug(f"Morozov equation has no root on [1e{lo:g}, 1e{hi:g}]; using alpha = 1e{end:g}")
        return tikhonov_solve(svd, rhs, 10.0 ** end), 10.0 ** end, True
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if morozov(mid) > 0:
            hi = mid
        else:
            lo = mid
    alpha = 10.0 ** (0.5 * (lo + hi))
    return tikhonov_solve(svd, rhs, alpha), alpha, False


# ---------------------------------------------------------------------------
# Detection

@dataclass
class DetectionCurve:
    k_grid: np.ndarray
    gnorm: np.ndarray
    z_points: np.ndarray
    detected_ks: list
    herglotz: np.ndarray = None
    density: np.ndarray = None
    metric: str = 'herglotz'
    degenerate: bool = False
    morozov_warnings: int = 0

    @property
    def spike_mask(self):
        mask = np.zeros(len(self.k_grid), dtype=bool)
        for k in self.detected_ks:
            mask[np.argmin(np.abs(self.k_grid - k))] = True
        return mask

    def to_rows(self):
        spikes = self.spike_mask
        return [{'k': float(k), 'gnorm': float(g), 'herglotz': float(h), 'density': float(d),
                 'is_spike': bool(s)}
                for k, g, h, d, s in zip(self.k_grid, self.gnorm, self.herglotz, self.density, spikes)]


def sampling_points(domain, count):
    """Deterministic Halton points inside 0.8 D"""
    if count < 1:
        raise InvalidParameterError(f"num_z must be at least 1, got {count}")
    u = qmc.Halton(d=2, scramble=False).random(count + 1)[1:]
    if domain.is_disk:
        r = SAMPLING_SHRINK * domain.radius * np.sqrt(u[:, 0])
        t = 2.0 * math.pi * u[:, 1]
        return np.column_stack([r * np.cos(t), r * np.sin(t)])
    centre = 0.5 * (domain.lo + domain.hi)
    half = 0.5 * SAMPLING_SHRINK * (domain.hi - domain.lo)
    return centre + half * (2.0 * u - 1.0)


def spike_background(values, half_width=TREND_HALF_WIDTH):
    """
    Smooth k-trend of a norm curve and the typical size of its fluctuation about it.

    The trend is a running median over +/- half_width grid points, which follows the slow
    growth of the norm with k but not a resonance narrower than the window. The spread is the
    median absolute residual, floored at SPREAD_FLOOR x the median trend level.
    """
    values = np.asarray(values, dtype=float)
    trend = median_filter(values, size=2 * half_width + 1, mode='nearest')
    spread = float(np.median(np.abs(values - trend)))
    return trend, max(spread, SPREAD_FLOOR * float(np.median(trend)))


def find_spikes(k_grid, values, factor=DEFAULT_SPIKE_FACTOR, neighbors=SPIKE_NEIGHBORS):
    """Interior local maxima whose rise over the k-trend exceeds factor x the median background"""
    values = np.asarray(values, dtype=float)
    if not float(np.median(values)) > 0:
        return []
    trend, spread = spike_background(values)
    spikes = []
    for i in range(1, len(values) - 1):
        window = values[max(0, i - neighbors):i + neighbors + 1]
        if values[i] < window.max() or values[i] <= SPIKE_FLOOR * trend[i]:
            continue
        if values[i] - trend[i] > factor * spread:
            spikes.append(float(k_grid[i]))
    return spikes


def detect_te(k_min, k_max, radius, a, n, delta=DEFAULT_NOISE, directions=DEFAULT_DIRECTIONS,
              num_z=DEFAULT_NUM_Z, k_step=DEFAULT_K_STEP, spike_factor=DEFAULT_SPIKE_FACTOR,
              seed=DEFAULT_SEED, norm='herglotz'):
    """Median over z of ||v_g|| (or ||g||) on a k-grid, with spikes flagged"""
    if not 0 < k_min < k_max:
        raise InvalidParameterError(f"bad k-window ({k_min}, {k_max})")
    if not delta >= 0:
        raise InvalidParameterError(f"delta must be nonnegative, got {delta}")
    if norm not in KNOWN_NORMS:
        raise InvalidParameterError(f"norm must be one of {KNOWN_NORMS}, got {norm!r}")
    _check_directions(directions)
    domain = Domain.disk(radius)
    points = max(3, int(round((k_max - k_min) / k_step)) + 1)
    k_grid = np.linspace(k_min, k_max, points)
    z_points = sampling_points(domain, num_z)
    logger.info(f"LSM sweep: {points} wavenumbers, {num_z} sampling points, N={directions}, delta={delta:g}")

    def one(index):
        k = float(k_grid[index])
        rng = np.random.default_rng([seed, index])
        matrix = add_noise(farfield_disk(k, radius, a, n, directions), delta, rng)
        if matrix.is_degenerate:
            return 0.0, 0.0, 0, True
        herglotz, density, warnings = [], [], 0
        for z in z_points:
            g, _, warned = tikhonov_morozov(matrix, z, delta)
            warnings += warned
            herglotz.append(herglotz_norm(g, k, domain))
            density.append(density_norm(g))
        return float(np.median(herglotz)), float(np.median(density)), warnings, False

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(one, range(points)))

    herglotz = np.array([r[0] for r in results])
    density = np.array([r[1] for r in results])
    warnings = sum(r[2] for r in results)
    degenerate = all(r[3] for r in results)
    gnorm = herglotz if norm == 'herglotz' else density

    if degenerate:
        logger.warning("⚠️ far field vanishes identically (no contrast); no spikes reported")
        detected = []
    else:
        detected = find_spikes(k_grid, gnorm, spike_factor)
    if warnings:
        logger.warning(f"⚠️ Morozov bracket failed for {warnings} (k, z) pairs")
    logger.info(f"detected spikes at {[round(k, 4) for k in detected]}")
    return DetectionCurve(k_grid=k_grid, gnorm=gnorm, z_points=z_points, detected_ks=detected,
                          herglotz=herglotz, density=density, metric=norm, degenerate=degenerate,
                          morozov_warnings=warnings)

