"""Dense complex linear algebra: Hermitian eigendecomposition and SVD.

Everything downstream (feedback encoding, covariance analysis, spectrum
estimation) runs on matrices no larger than a few antennas on a side, so
both routines use cyclic Jacobi sweeps: slower asymptotically than
blocked algorithms, but simple, robust, and deterministic.  Outputs are
phase-normalized so identical inputs give identical decompositions.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError, InputError

#: largest supported eigenproblem dimension
MAX_EIG_DIM = 64


@dataclass(frozen=True)
class EigenDecomposition:
    """Result of :func:`hermitian_eig`.

    Attributes
    ----------
    values : ndarray
        Real eigenvalues, ascending.
    vectors : ndarray
        Unitary matrix; column i is the eigenvector for ``values[i]``,
        scaled so its largest-magnitude entry is real positive.
    """

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self):
        """Return V.diag(values).V^H."""
        return (self.vectors * self.values) @ self.vectors.conj().T


@dataclass(frozen=True)
class SvdDecomposition:
    """Thin singular value decomposition A = U.diag(sigma).V^H.

    ``sigma`` is descending and non-negative; U and V have orthonormal
    columns (min(m, n) of them).  Each V column is scaled so its
    largest-magnitude entry is real positive; the matching U column
    carries the counter-phase so the product is unchanged.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        """Return U.diag(sigma).V^H."""
        return (self.u * self.sigma) @ self.v.conj().T


def _as_matrix(a, op):
    a = np.asarray(a)
    if a.ndim != 2:
        raise DimensionError(f"{op} expects a 2-D matrix, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"{op} expects at least one row and column")
    a = a.astype(np.complex128, copy=False)
    if not (np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag))):
        raise InputError(f"{op} input contains non-finite entries")
    return a


def hermitian_eig(a):
    """Eigendecompose a Hermitian matrix.

    The input is symmetrized internally ((A + A^H)/2), so slightly
    non-Hermitian inputs from accumulated roundoff are fine.  Square
    inputs only, up to MAX_EIG_DIM on a side.

    Returns
    -------
    EigenDecomposition
        Eigenvalues ascending, orthonormal phase-fixed eigenvectors.
    """
    a = _as_matrix(a, "hermitian_eig")
    n, m = a.shape
    if n != m:
        raise DimensionError(f"hermitian_eig expects a square matrix, got {a.shape}")
    if n > MAX_EIG_DIM:
        raise DimensionError(f"hermitian_eig supports n <= {MAX_EIG_DIM}, got {n}")
    sym = (a + a.conj().T) / 2.0
    w, v = _kernels.eigh(sym)
    return EigenDecomposition(values=w, vectors=v)


def svd(a):
    """Thin SVD of an arbitrary complex matrix.

    Returns
    -------
    SvdDecomposition
        With r = min(m, n): U is m x r, sigma has r descending entries,
        V is n x r.
    """
    a = _as_matrix(a, "svd")
    u, s, v = _kernels.svd(a)
    return SvdDecomposition(u=u, sigma=s, v=v)
