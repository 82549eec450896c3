"""Dense linear-algebra kernels with explicit tolerance semantics.

Everything downstream (Riccati sweep, feedforward, verification) funnels its
pseudo-inverses, definiteness gates, and range-inclusion gates through this
module so tolerance behavior is defined in exactly one place.  All tolerances
are relative to the scale of the operands with an absolute floor of
``TOL_FLOOR``.
"""

import numpy as np

from .errors import NumericalFailure

EPS = float(np.finfo(np.float64).eps)

# Absolute floor applied to every relative tolerance parameter.
TOL_FLOOR = 1e-14


def symmetrize(mat):
    """Return the symmetric part (M + M^T)/2 of a square matrix."""
    mat = np.asarray(mat, dtype=float)
    return 0.5 * (mat + mat.T)


def is_symmetric(mat, tol=1e-12):
    """True iff max|M - M^T| <= tol * (1 + max|M|)."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return False
    scale = 1.0 + float(np.max(np.abs(mat))) if mat.size else 1.0
    return float(np.max(np.abs(mat - mat.T))) <= max(tol, TOL_FLOOR) * scale if mat.size else True


def pinv(mat, sv_cutoff=None):
    """Moore-Penrose pseudo-inverse via singular value decomposition.

    Parameters
    ----------
    mat : (r, c) array_like
        Matrix to invert.  May be rectangular or rank deficient.
    sv_cutoff : float, optional
        Singular values <= ``sv_cutoff`` are treated as zero.  When omitted
        the cutoff is ``max(r, c) * eps * sigma_max``, which zeroes exactly
        the singular values that are indistinguishable from rounding noise
        at the scale of the matrix.

    Returns
    -------
    (c, r) ndarray
        The pseudo-inverse.  Satisfies the four Penrose conditions to
        ``1e-10 * (1 + ||M||_F)`` for well-scaled input.

    Raises
    ------
    NumericalFailure
        If the SVD does not converge.
    """
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"pinv expects a 2-d array, got shape {a.shape}")
    if a.size == 0:
        return np.zeros(a.shape[::-1])
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    if sv_cutoff is None:
        cutoff = max(a.shape) * EPS * float(s[0])
    else:
        cutoff = float(sv_cutoff)
    inv = np.zeros_like(s)
    keep = s > cutoff
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


def is_psd(mat, tol=1e-10):
    """Test positive semidefiniteness of a symmetric matrix.

    True iff the smallest eigenvalue is >= -tol * (1 + ||M||_2).  The input
    is expected to be symmetric; only its lower triangle is read.
    """
    a = np.asarray(mat, dtype=float)
    if a.size == 0:
        return True
    try:
        w = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigvalsh did not converge: {exc}") from exc
    spectral = float(np.max(np.abs(w)))
    return float(w[0]) >= -max(tol, TOL_FLOOR) * (1.0 + spectral)


def range_contains(mat, cols, tol=1e-9):
    """Test whether the columns of ``cols`` lie in the column space of ``mat``.

    True iff ||(I - M M^+) N||_F <= tol * (1 + ||N||_F).  ``cols`` may be a
    single vector, treated as one column.
    """
    m = np.asarray(mat, dtype=float)
    n = np.asarray(cols, dtype=float)
    if n.ndim == 1:
        n = n[:, None]
    resid = n - m @ (pinv(m) @ n)
    return float(np.linalg.norm(resid)) <= max(tol, TOL_FLOOR) * (1.0 + float(np.linalg.norm(n)))


def pinv_quadform(mat, vec):
    """Quadratic form <M^+ v, v>.

    For PSD ``mat`` whose range contains ``vec`` this equals the squared
    half-inverse energy |(M^+)^{1/2} v|^2; it is computed without matrix
    square roots.  Result is >= -1e-12 * (1 + |v|^2) up to rounding.
    """
    v = np.asarray(vec, dtype=float)
    return float(v @ (pinv(mat) @ v))
