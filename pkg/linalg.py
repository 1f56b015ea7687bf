"""
Linear Algebra
Sparse assembly/finalize, direct solves, shift-invert eigen-iteration for generalized pencils and dense SVD
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse import linalg as spla

from errors import FactorizationError, InvalidParameterError

logger = logging.getLogger(__name__)

DIRECT_RESIDUAL_TOL = 1e-9
EIGEN_RESIDUAL_TOL = 1e-8
REAL_FILTER = 1e-6
DENSE_EIGEN_LIMIT = 60
SVD_SIZE_LIMIT = 512


@dataclass
class EigenResult:
    """One generalized eigenpair K x = lambda M x"""

    value: complex
    eigenvector: np.ndarray
    residual: float
    is_real: bool

    @property
    def eigenvalue(self):
        return float(self.value.real) if self.is_real else self.value

    @property
    def converged(self):
        return self.residual <= EIGEN_RESIDUAL_TOL

    def to_dict(self):
        return {
            'eigenvalue_re': float(self.value.real),
            'eigenvalue_im': float(self.value.imag),
            'is_real': self.is_real,
            'residual': self.residual,
        }


@dataclass
class DenseSVD:
    """a = u @ diag(s) @ vh with s descending"""

    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray

    def reconstruct(self):
        return (self.u * self.s) @ self.vh

    @property
    def norm(self):
        return float(self.s[0]) if self.s.size else 0.0


def finalize(rows, cols, values, shape):
    """Triplets to CSR with duplicate entries summed"""
    rows = np.asarray(rows).ravel()
    cols = np.asarray(cols).ravel()
    values = np.asarray(values).ravel()
    if rows.size and (rows.min() < 0 or rows.max() >= shape[0] or cols.min() < 0 or cols.max() >= shape[1]):
        raise InvalidParameterError(f"triplet indices out of range for shape {shape}")
    m = sp.coo_matrix((values, (rows, cols)), shape=shape).tocsr()
    m.sum_duplicates()
    return m


def is_symmetric(m, tol=1e-12):
    diff = (m - m.T).tocsr()
    if diff.nnz == 0:
        return True
    scale = max(abs(m).max(), 1.0)
    return abs(diff).max() <= tol * scale


def factorize(m):
    """Sparse LU with COLAMD column ordering"""
    m = sp.csc_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise InvalidParameterError(f"matrix must be square, got {m.shape}")
    try:
        return spla.splu(m, permc_spec='COLAMD')
    except RuntimeError as e:
        raise FactorizationError(f"sparse LU failed: {e}")


def _lu_solve(lu, rhs):
    if np.iscomplexobj(rhs) and lu.L.dtype.kind != 'c':
        return lu.solve(np.ascontiguousarray(rhs.real)) + 1j * lu.solve(np.ascontiguousarray(rhs.imag))
    return lu.solve(rhs)


def solve_direct(m, rhs):
    """Solve m x = rhs; raises FactorizationError when m is singular to tolerance"""
    m = sp.csr_matrix(m)
    rhs = np.asarray(rhs)
    lu = factorize(m)
    x = _lu_solve(lu, rhs)
    if not np.all(np.isfinite(x)):
        raise FactorizationError("solution is not finite; matrix singular to working precision")
    scale = np.linalg.norm(rhs)
    if scale > 0:
        residual = np.linalg.norm(m @ x - rhs) / scale
        if residual > DIRECT_RESIDUAL_TOL:
            raise FactorizationError(f"relative residual {residual:.2e} exceeds {DIRECT_RESIDUAL_TOL:.0e}")
    return x


def _realify(vector):
    """Rotate the phase so the largest entry is real, then drop the imaginary part"""
    pivot = vector[np.argmax(np.abs(vector))]
    rotated = vector * (np.conj(pivot) / abs(pivot))
    return rotated.real


def _pack(k, m, value, vector):
    is_real = abs(value.imag) <= REAL_FILTER * abs(value)
    if is_real:
        value = complex(value.real, 0.0)
        vector = _realify(vector)
    vector = vector / np.linalg.norm(vector)
    residual = float(np.linalg.norm(k @ vector - value.real * (m @ vector) if is_real
                                    else k @ vector - value * (m @ vector)))
    return EigenResult(value=complex(value), eigenvector=vector, residual=residual, is_real=is_real)


def eig_shift_invert(k, m, shift, count, tol=0.0):
    """
    The `count` eigenvalues of K x = lambda M x nearest `shift`.

    Works on (K - shift M)^-1 M with implicitly restarted Arnoldi (ARPACK); small pencils
    are solved densely. Complex values are kept but flagged; only entries with
    |Im| <= 1e-6 |lambda| carry is_real.
    """
    k = sp.csr_matrix(k)
    m = sp.csr_matrix(m)
    n = k.shape[0]
    if count < 1:
        raise InvalidParameterError(f"count must be positive, got {count}")

    shifted = (k - shift * m).tocsc()
    lu = factorize(shifted)

    if n <= max(DENSE_EIGEN_LIMIT, 2 * count + 12):
        values, vectors = scipy.linalg.eig(k.toarray(), m.toarray())
        finite = np.isfinite(values)
        values, vectors = values[finite], vectors[:, finite]
    else:
        operator = spla.LinearOperator((n, n), matvec=lambda x: _lu_solve(lu, m @ x),
                                       dtype=np.result_type(k.dtype, m.dtype, float))
        ncv = min(n - 1, max(2 * count + 10, 20))
        try:
            mu, vectors = spla.eigs(operator, k=count, which='LM', ncv=ncv, tol=tol)
        except spla.ArpackNoConvergence as e:
            logger.warning(f"⚠️ Arnoldi did not fully converge at shift {shift:.6g}; "
                           f"keeping {len(e.eigenvalues)} converged values")
            mu, vectors = e.eigenvalues, e.eigenvectors
        keep = np.abs(mu) > 0
        values = shift + 1.0 / mu[keep]
        vectors = vectors[:, keep]

    order = np.argsort(np.abs(values - shift))[:count]
    results = [_pack(k, m, complex(values[i]), vectors[:, i]) for i in order]
    for r in results:
        if r.is_real and not r.converged:
            logger.warning(f"⚠️ eigenvalue {r.value.real:.10g} has residual {r.residual:.2e}")
    return results


def eig_symmetric_smallest(a, b, count):
    """Smallest eigenvalues of the SPD pencil A u = lambda B u, ascending, with eigenvectors"""
    a = sp.csr_matrix(a)
    b = sp.csr_matrix(b)
    n = a.shape[0]
    count = min(count, n)
    if n <= max(DENSE_EIGEN_LIMIT, 2 * count + 12):
        values, vectors = scipy.linalg.eigh(a.toarray(), b.toarray())
        return values[:count], vectors[:, :count]
    try:
        values, vectors = spla.eigsh(a.tocsc(), k=count, M=b.tocsc(), sigma=0.0, which='LM')
    except RuntimeError as e:
        raise FactorizationError(f"shift-invert factorization failed: {e}")
    order = np.argsort(values)
    return values[order], vectors[:, order]


def dense_real_spectrum(k, m, lo, hi):
    """Brute-force real finite eigenvalues of a small pencil inside (lo, hi)"""
    values = scipy.linalg.eigvals(np.asarray(sp.csr_matrix(k).toarray()),
                                  np.asarray(sp.csr_matrix(m).toarray()))
    values = values[np.isfinite(values)]
    real = values[np.abs(values.imag) <= REAL_FILTER * np.abs(values)].real
    return np.sort(real[(real > lo) & (real < hi)])


def svd_dense(a):
    """Thin SVD of a dense (complex) matrix"""
    a = np.asarray(a)
    if a.ndim != 2 or max(a.shape) > SVD_SIZE_LIMIT:
        raise InvalidParameterError(f"svd_dense supports matrices up to {SVD_SIZE_LIMIT} per side, got {a.shape}")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return DenseSVD(u=u, s=s, vh=vh)
