"""Small dense linear-algebra kernel shared by the rest of the package.

Everything here is a pure function of its inputs. Matrices are plain
``numpy.ndarray`` objects; instances in this package are tiny (d well below
100) so there is no need for anything iterative.
"""

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPSD

SYM_TOL = 1e-9


def _check_square(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    return A


def cho_factor_jitter(A):
    """Cholesky factor of a symmetric PSD matrix, retrying once with jitter.

    The jitter is ``1e-12 * trace(A) / d`` on the diagonal. A second failure
    raises :class:`NotPSD`.
    """
    A = _check_square(A)
    if not np.all(np.isfinite(A)):
        raise NotPSD("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - A.T), initial=0.0) > SYM_TOL * scale:
        raise NotPSD("matrix is not symmetric")
    try:
        return scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    d = A.shape[0]
    jitter = 1e-12 * np.trace(A) / d
    try:
        return scipy.linalg.cho_factor(A + jitter * np.eye(d), lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPSD("factorization failed after jitter") from exc


def solve_psd(A, b):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``."""
    A = _check_square(A)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"A is {A.shape}, b has leading dim {b.shape[0]}")
    factor = cho_factor_jitter(A)
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def mahalanobis_sq(v, A):
    """Return ``v^T A^{-1} v`` for PD ``A``.

    ``v`` may also be a 2-d array of row vectors, in which case one value per
    row is returned.
    """
    A = _check_square(A)
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != A.shape[0]:
        raise DimensionMismatch(f"v has dim {v.shape[-1]}, A is {A.shape}")
    c, lower = cho_factor_jitter(A)
    # ||L^{-1} v||^2 with A = L L^T
    u = scipy.linalg.solve_triangular(c, v.T, lower=lower, check_finite=False)
    return np.maximum(np.sum(u * u, axis=0), 0.0)


def extreme_singular_values(A):
    """Smallest and largest singular value of ``A``, via eigenvalues of ``A^T A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        raise DimensionMismatch("empty matrix")
    ata = A.T @ A
    ev = np.linalg.eigvalsh(ata)
    ev = np.clip(ev, 0.0, None)
    smin = float(np.sqrt(ev[0])) if A.shape[0] >= A.shape[1] else 0.0
    smax = float(np.sqrt(ev[-1]))
    # eigvalsh on A^T A loses accuracy near zero; fall back to an SVD there
    if smax > 0 and smin < 1e-6 * smax:
        s = np.linalg.svd(A, compute_uv=False)
        smin = float(s[-1]) if A.shape[0] >= A.shape[1] else 0.0
    return smin, smax


def sigma_min(A):
    return extreme_singular_values(A)[0]


def unit_vector(d, i):
    e = np.zeros(d)
    e[i] = 1.0
    return e
