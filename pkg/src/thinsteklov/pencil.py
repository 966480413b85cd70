"""Dense symmetric pencils ``A v = lambda B v`` with A SPD and B PSD.

The right-hand form may be singular (a boundary mass matrix is zero on
interior coefficients). Finite eigenvalues are recovered through the
Cholesky factor ``A = L L^T``: with ``B = G^T G`` and ``W = G L^{-T}``
(``r x n``), the nonzero eigenvalues ``m`` of the ``r x r`` matrix
``W W^T`` give ``lambda = 1 / m``. Zero ``m`` are the infinite eigenvalues
of the pencil and are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .errors import NotPositiveDefinite, TooFewFinite

SYMMETRY_RTOL = 1e-12
# eigenvalues m of W W^T below this fraction of max(m) count as infinite lambda
RANK_RTOL = 1e-12


@dataclass
class EigenSolution:
    """Ascending finite eigenvalues with B-orthonormal eigenvectors.

    ``vectors[:, k]`` pairs with ``values[k]``. ``n_finite`` is the number
    of finite eigenvalues of the pencil (the rank of B on the active
    coefficients), of which only the first ``len(values)`` are returned.
    """

    values: np.ndarray
    vectors: np.ndarray
    n_finite: int
    residuals: np.ndarray

    def __len__(self):
        return len(self.values)


def check_symmetric(a, rtol=SYMMETRY_RTOL, name="matrix"):
    a = np.asarray(a)
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        return
    err = np.max(np.abs(a - a.T)) / scale
    if err > rtol:
        raise ValueError(f"{name} is not symmetric (relative asymmetry {err:.3e})")


def restrict(a, active):
    """Delete the rows and columns of inactive (clamped) coefficients."""
    if active is None:
        return a
    idx = np.flatnonzero(active)
    return a[np.ix_(idx, idx)] if a.ndim == 2 else a[idx]


def expand(v, active):
    """Inverse of :func:`restrict` for vectors: zero-fill clamped slots."""
    if active is None:
        return v
    out = np.zeros((len(active),) + v.shape[1:], dtype=v.dtype)
    out[np.flatnonzero(active)] = v
    return out


def factor_spd(a):
    """Lower Cholesky factor ``L`` with ``A = L L^T``.

    Raises ``NotPositiveDefinite`` carrying the zero-based index of the
    first failing pivot.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 0:
        return a.copy()
    c, info = lapack.dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:  # pragma: no cover
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return c


def solve_spd(a, rhs, factor=None):
    """Solve ``A x = rhs`` for SPD ``A`` (vector or matrix right-hand side)."""
    a = np.asarray(a, dtype=float)
    L = factor_spd(a) if factor is None else factor
    x = linalg.cho_solve((L, True), rhs, check_finite=False)
    return x


def symmetric_eigh(s):
    """Eigen-decomposition of a symmetric matrix, ascending eigenvalues."""
    return linalg.eigh(s, check_finite=False)


def gram_factor(b):
    """Factor ``G`` with ``B = G^T G`` and as many rows as rank(B).

    Rows and columns of B that are identically zero are skipped; on the
    remaining support a Cholesky factorization is tried first and a
    thresholded eigen-decomposition is the fallback for singular supports.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    support = np.flatnonzero(np.any(b != 0.0, axis=1))
    if support.size == 0:
        return np.zeros((0, n))
    bs = b[np.ix_(support, support)]
    c, info = lapack.dpotrf(bs, lower=1, clean=1, overwrite_a=0)
    if info == 0:
        g = np.zeros((support.size, n))
        g[:, support] = c.T
        return g
    w, q = symmetric_eigh(bs)
    keep = w > RANK_RTOL * max(w.max(), 0.0)
    g = np.zeros((int(keep.sum()), n))
    g[:, support] = np.sqrt(w[keep])[:, None] * q[:, keep].T
    return g


def finite_pencil_eigs(a, b, k_max, active=None):
    """First ``k_max`` finite eigenpairs of ``A v = lambda B v``.

    Parameters
    ----------
    a, b : ndarray
        Symmetric matrices; A must be positive definite on the active
        coefficients and B positive semidefinite.
    k_max : int
        Number of eigenpairs requested.
    active : bool ndarray, optional
        Mask of unconstrained coefficients. Clamped ones are removed before
        solving and returned eigenvectors are zero there.

    Returns
    -------
    EigenSolution
    """
    check_symmetric(a, name="A")
    check_symmetric(b, name="B")
    A = restrict(np.asarray(a, dtype=float), active)
    B = restrict(np.asarray(b, dtype=float), active)

    L = factor_spd(A)
    G = gram_factor(B)
    # W^T = L^{-1} G^T
    Wt = linalg.solve_triangular(L, G.T, lower=True, check_finite=False)
    R = Wt.T @ Wt
    R = 0.5 * (R + R.T)
    m, Y = symmetric_eigh(R)
    m = m[::-1]
    Y = Y[:, ::-1]
    finite = m > RANK_RTOL * max(m[0], 0.0) if m.size else np.zeros(0, bool)
    n_finite = int(finite.sum())
    if k_max > n_finite:
        raise TooFewFinite(f"requested {k_max} eigenpairs, pencil has {n_finite} finite")
    m = m[:k_max]
    Y = Y[:, :k_max]
    V = linalg.solve_triangular(L, Wt @ Y, lower=True, trans="T", check_finite=False) / m
    # 1/m inherits the conditioning of L; the Rayleigh quotient of the
    # recovered vector is accurate to second order in its error
    AV = A @ V
    BV = B @ V
    lam = np.einsum("ij,ij->j", V, AV) / np.einsum("ij,ij->j", V, BV)
    order = np.argsort(lam, kind="stable")
    lam, V = lam[order], V[:, order]

    anorm = np.linalg.norm(A, "fro")
    res = np.linalg.norm(A @ V - (B @ V) * lam, axis=0) / (anorm * np.linalg.norm(V, axis=0))
    return EigenSolution(values=lam, vectors=expand(V, active), n_finite=n_finite, residuals=res)
