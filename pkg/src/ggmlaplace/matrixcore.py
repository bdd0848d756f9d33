"""Dense symmetric matrix helpers: Cholesky, log-determinant, inverse, norms.

Matrices are plain 2-D ``numpy`` arrays. ``as_symmetric`` validates and
symmetrises input; everything else assumes it has been called.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import NotPositiveDefinite

PIVOT_RTOL = 1e-12


def as_symmetric(m, atol=1e-10):
    """Return ``m`` as a float array, exactly symmetric.

    Raises ``ValueError`` if ``m`` is not square or is asymmetric beyond
    ``atol`` (relative to its largest entry).
    """
    a = np.array(m, dtype=float, ndmin=2)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > atol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular ``L`` with ``L @ L.T`` equal to the source matrix."""

    lower: np.ndarray

    @property
    def dim(self):
        return self.lower.shape[0]

    def log_det(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))

    def solve(self, b):
        y = solve_triangular(self.lower, b, lower=True, check_finite=False)
        return solve_triangular(self.lower.T, y, lower=False, check_finite=False)

    def inverse(self):
        linv = solve_triangular(self.lower, np.eye(self.dim), lower=True, check_finite=False)
        inv = linv.T @ linv
        return 0.5 * (inv + inv.T)

    def reconstruct(self):
        return self.lower @ self.lower.T


def cholesky(m):
    """Cholesky factor of a symmetric matrix.

    A pivot (squared diagonal entry of the factor) at or below
    ``1e-12 * max(diag(m))`` counts as failure. Raises
    :class:`NotPositiveDefinite` carrying the 0-based index of the failing
    pivot.
    """
    a = np.asarray(m, dtype=float)
    c, info = lapack.dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(f"leading minor {info} is not positive definite", pivot=info - 1)
    if info < 0:
        raise ValueError(f"illegal argument to dpotrf ({info})")
    piv = np.diag(c) ** 2
    dmax = float(np.max(np.diag(a)))
    bad = np.flatnonzero(piv <= PIVOT_RTOL * dmax)
    if bad.size:
        k = int(bad[0])
        raise NotPositiveDefinite(f"pivot {k} below tolerance ({piv[k]:.3e})", pivot=k)
    return CholeskyFactor(np.tril(c))


def is_positive_definite(m):
    try:
        cholesky(m)
    except NotPositiveDefinite:
        return False
    return True


def log_det(f):
    return f.log_det()


def inverse(f):
    return f.inverse()


def norms(m):
    """Frobenius, max-abs and spectral norms of a symmetric matrix."""
    a = np.asarray(m, dtype=float)
    if not a.size:
        return {"frobenius": 0.0, "max_abs": 0.0, "spectral": 0.0}
    # largest singular value; the symmetric eigensolver loses digits on badly scaled input
    return {
        "frobenius": float(np.sqrt(np.sum(a * a))),
        "max_abs": float(np.max(np.abs(a))),
        "spectral": float(np.linalg.norm(a, 2)),
    }
