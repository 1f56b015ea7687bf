"""
Periodic Homogenization
Cell problem, effective tensor A_h and mean index n_h, Voigt-Reuss bounds and the first-order corrector
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from coeffs import cell_field, cell_mean, mean_tensor
from config import DEFAULT_CELL_DIVISIONS
from errors import InvalidParameterError
from linalg import solve_direct
from mesh import (assemble_flux_load, assemble_stiffness, interpolate, lumped_mass,
                  triangle_tensors, unit_cell_mesh)

logger = logging.getLogger(__name__)

MEAN_ZERO_TOL = 1e-10
BOUND_TOL = 1e-8


@dataclass(frozen=True)
class CellSolution:
    """psi[i] holds the dof values of the cell function for direction e_i"""

    psi: np.ndarray
    mesh: object
    field: object
    mean_zero: bool
    residual: float

    def mean(self):
        weights = lumped_mass(self.mesh)
        return self.psi @ weights


@dataclass(frozen=True)
class EffectiveMedium:
    a_h: np.ndarray
    n_h: float
    voigt: np.ndarray
    reuss: np.ndarray

    def check_bounds(self, samples=100, seed=0, tol=BOUND_TOL):
        """reuss <= a_h <= voigt as quadratic forms on random unit vectors"""
        rng = np.random.default_rng(seed)
        angles = rng.uniform(0.0, 2.0 * np.pi, samples)
        xi = np.column_stack([np.cos(angles), np.sin(angles)])
        lower = np.einsum('pi,ij,pj->p', xi, self.a_h - self.reuss, xi)
        upper = np.einsum('pi,ij,pj->p', xi, self.voigt - self.a_h, xi)
        return bool(lower.min() >= -tol and upper.min() >= -tol)

    @property
    def is_symmetric(self):
        return abs(self.a_h[0, 1] - self.a_h[1, 0]) <= 1e-10

    def to_dict(self):
        return {
            'a11': float(self.a_h[0, 0]),
            'a12': float(self.a_h[0, 1]),
            'a22': float(self.a_h[1, 1]),
            'n_h': float(self.n_h),
            'voigt11': float(self.voigt[0, 0]),
            'voigt12': float(self.voigt[0, 1]),
            'voigt22': float(self.voigt[1, 1]),
            'reuss11': float(self.reuss[0, 0]),
            'reuss12': float(self.reuss[0, 1]),
            'reuss22': float(self.reuss[1, 1]),
        }


def solve_cell(field, mesh):
    """
    Solve int A grad(psi_i) . grad(phi) = int A e_i . grad(phi) on the periodic cell.

    The mean-zero condition is one Lagrange multiplier row, so the saddle system stays
    symmetric. Returns a CellSolution with both directions.
    """
    if not mesh.is_periodic:
        raise InvalidParameterError("solve_cell needs a periodic unit-cell mesh")
    field = cell_field(field)
    tensors = triangle_tensors(mesh, field)
    stiffness = assemble_stiffness(mesh, tensors)
    weights = lumped_mass(mesh)
    size = mesh.n_dofs

    constraint = sp.csr_matrix(weights.reshape(1, -1))
    system = sp.bmat([[stiffness, constraint.T], [constraint, None]], format='csr')

    rhs = np.zeros((size + 1, 2))
    for j, direction in enumerate(np.eye(2)):
        rhs[:size, j] = assemble_flux_load(mesh, tensors, direction)

    if np.abs(rhs).max() == 0.0:
        psi = np.zeros((2, size))
        residual = 0.0
    else:
        solution = solve_direct(system, rhs)
        psi = solution[:size].T.copy()
        residual = float(np.linalg.norm(system @ solution - rhs) / np.linalg.norm(rhs))

    means = psi @ weights
    mean_zero = bool(np.abs(means).max() <= MEAN_ZERO_TOL)
    logger.info(f"cell problem for {field.name}: {size} dofs, residual {residual:.2e}, "
                f"means ({means[0]:.1e}, {means[1]:.1e})")
    return CellSolution(psi=psi, mesh=mesh, field=field, mean_zero=mean_zero, residual=residual)


def _psi_gradients(cell):
    _, grads = cell.mesh.geometry()
    corners = cell.psi[:, cell.mesh.dofs]
    # (direction, triangle, component)
    return np.einsum('itk,tkd->itd', corners, grads)


def effective_tensor(field, cell):
    """A_h = int (A - A grad psi), symmetrized; n_h and both bounds from cell quadrature"""
    field = cell_field(field)
    mesh = cell.mesh
    areas, _ = mesh.geometry()
    tensors = triangle_tensors(mesh, field)
    grad_psi = _psi_gradients(cell)

    a_h = np.empty((2, 2))
    for j in range(2):
        flux = tensors[:, :, j] - np.einsum('tij,tj->ti', tensors, grad_psi[j])
        a_h[:, j] = areas @ flux
    a_h = 0.5 * (a_h + a_h.T)

    medium = EffectiveMedium(
        a_h=a_h,
        n_h=cell_mean(field, 'n'),
        voigt=mean_tensor(field),
        reuss=np.linalg.inv(mean_tensor(field, inverse=True)),
    )
    if not medium.check_bounds():
        logger.warning(f"⚠️ a_h for {field.name} falls outside the Voigt-Reuss bounds")
    return medium


def corrector(cell, grad_w, y):
    """First-order corrector -psi(y) . grad_w at one cell point"""
    return float(corrector_field(cell, grad_w, np.asarray(y, dtype=float).reshape(1, 2))[0])


def corrector_field(cell, grad_w, points):
    grad_w = np.asarray(grad_w, dtype=float)
    if not np.any(grad_w) or not np.any(cell.psi):
        return np.zeros(len(np.atleast_2d(points)))
    psi1 = interpolate(cell.mesh, cell.psi[0], points)
    psi2 = interpolate(cell.mesh, cell.psi[1], points)
    return -(psi1 * grad_w[0] + psi2 * grad_w[1])


def homogenize(field, divisions=DEFAULT_CELL_DIVISIONS):
    """Mesh the cell, solve both cell problems and return (CellSolution, EffectiveMedium)"""
    mesh = unit_cell_mesh(divisions, periodic=True)
    cell = solve_cell(field, mesh)
    medium = effective_tensor(field, cell)
    logger.info(f"✅ {field.name}: a_h = [[{medium.a_h[0, 0]:.6f}, {medium.a_h[0, 1]:.6f}], "
                f"[{medium.a_h[1, 0]:.6f}, {medium.a_h[1, 1]:.6f}]], n_h = {medium.n_h:.6f}")
    return cell, medium


if __name__ == "__main__":
    from coeffs import parse_preset

    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    for preset in ('sincos-A+sincos-n', 'rotated-A+layered-n', 'checkerboard:1,2,2,5'):
        homogenize(parse_preset(preset))
