"""Hermite-cubic finite elements for the clamped 4th-order limit problem.

Stiffness ``K`` discretizes ``D * int rho^(n-1) V'' psi''`` with
``D = 1 - sigma^2 N`` and mass ``M`` discretizes
``(n-1) int rho^(n-2) V psi``, both on ``[-l, l]`` with ``V = V' = 0`` at
the ends. Coefficient layout is ``(V(x_i), V'(x_i))`` per node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import linalg

from . import _accel
from ._accel import maybe_njit
from .core import (
    Profile,
    ProblemParams,
    distortion_factor,
    unit_ball_volume,
    validate_params,
)
from .errors import BadCount, OutOfDomain, SingularSystem, NotPositiveDefinite, ZeroTrace
from .hermite import eval_hermite, gauss_legendre, unit_shapes
from .pencil import EigenSolution, expand, finite_pencil_eigs, restrict, solve_spd

DEFAULT_QUAD = 4


@dataclass(frozen=True)
class Mesh1D:
    nodes: np.ndarray

    @property
    def n_elements(self) -> int:
        return len(self.nodes) - 1

    @property
    def l(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.nodes)


def build_mesh_1d(l: float, N: int) -> Mesh1D:
    """Uniform mesh of ``N`` elements on ``[-l, l]``."""
    if int(N) != N or N < 2:
        raise BadCount(f"need at least 2 elements, got {N!r}")
    nodes = np.linspace(-l, l, int(N) + 1)
    nodes[0], nodes[-1] = -l, l
    return Mesh1D(nodes)


@dataclass
class HermiteField:
    """C1 piecewise cubic stored as ``(value, slope)`` per node."""

    mesh: Mesh1D
    coeffs: np.ndarray

    @property
    def values(self):
        return self.coeffs[0::2]

    @property
    def slopes(self):
        return self.coeffs[1::2]

    @classmethod
    def zeros(cls, mesh: Mesh1D) -> "HermiteField":
        return cls(mesh, np.zeros(mesh.n_dofs))

    @classmethod
    def interpolate(cls, mesh: Mesh1D, f, df) -> "HermiteField":
        c = np.empty(mesh.n_dofs)
        c[0::2] = f(mesh.nodes)
        c[1::2] = df(mesh.nodes)
        return cls(mesh, c)


def eval_field_1d(field: HermiteField, x1):
    """Value, first and second derivative of ``field`` at ``x1``."""
    l = field.mesh.l
    x = np.asarray(x1, dtype=float)
    if np.any(np.abs(x) > l * (1 + 1e-12)):
        raise OutOfDomain(f"x1 outside [-{l}, {l}]")
    return eval_hermite(field.mesh.nodes, field.values, field.slopes, x)


@dataclass
class LimitPencil:
    """Clamped limit pencil.

    ``bending`` is the stiffness without the distortion factor; ``K`` is
    ``distortion * bending``. Keeping the scalar apart makes eigenvalues scale
    exactly with ``1 - sigma^2 N`` and leaves eigenvectors independent of it.

    ``bending_root`` and ``mass_root`` hold one row per quadrature point with
    ``bending = F^T F`` and ``M = H^T H``; energies evaluated as ``|F c|^2``
    avoid the cancellation of ``c^T K c``.
    """

    bending: np.ndarray
    distortion: float
    M: np.ndarray
    clamp: np.ndarray
    mesh: Mesh1D
    params: ProblemParams
    profile: Profile
    quad: int
    bending_root: Optional[np.ndarray] = None
    mass_root: Optional[np.ndarray] = None

    @property
    def K(self):
        return self.distortion * self.bending

    @property
    def active(self):
        return ~self.clamp


def _element_weights(params, profile, mesh, quad):
    t, w = gauss_legendre(quad)
    h = np.diff(mesh.nodes)
    x = mesh.nodes[:-1, None] + h[:, None] * t[None, :]
    rho = profile.evaluate(x)[0]
    n = params.n
    wk = rho ** (n - 1) * (w * h[:, None])
    wm = (n - 1) * rho ** (n - 2) * (w * h[:, None])
    return h, wk, wm, t


@maybe_njit
def _assemble_1d_numba(h, wk, wm, val, d2, K, M):
    ne, nq = wk.shape
    ni = np.empty(4)
    nd = np.empty(4)
    for e in range(ne):
        he = h[e]
        base = 2 * e
        for q in range(nq):
            for i in range(4):
                s = he if (i == 1 or i == 3) else 1.0
                ni[i] = val[i, q] * s
                nd[i] = d2[i, q] * s / (he * he)
            for i in range(4):
                for j in range(4):
                    K[base + i, base + j] += wk[e, q] * nd[i] * nd[j]
                    M[base + i, base + j] += wm[e, q] * ni[i] * ni[j]


def _assemble_1d_numpy(h, wk, wm, val, d2, K, M):
    ne = len(h)
    scale = np.ones((ne, 4))
    scale[:, 1] = h
    scale[:, 3] = h
    N = val[None, :, :] * scale[:, :, None]
    N2 = d2[None, :, :] * (scale / (h * h)[:, None])[:, :, None]
    Ke = np.einsum("eq,eiq,ejq->eij", wk, N2, N2)
    Me = np.einsum("eq,eiq,ejq->eij", wm, N, N)
    idx = 2 * np.arange(ne)[:, None] + np.arange(4)[None, :]
    rows = np.broadcast_to(idx[:, :, None], Ke.shape)
    cols = np.broadcast_to(idx[:, None, :], Ke.shape)
    np.add.at(K, (rows, cols), Ke)
    np.add.at(M, (rows, cols), Me)


def _energy_roots(h, wk, wm, val, d2, n_dofs):
    ne, nq = wk.shape
    scale = np.ones((ne, 4))
    scale[:, 1] = h
    scale[:, 3] = h
    N = val[None, :, :] * scale[:, :, None]
    N2 = d2[None, :, :] * (scale / (h * h)[:, None])[:, :, None]
    F = np.zeros((ne * nq, n_dofs))
    H = np.zeros((ne * nq, n_dofs))
    rows = np.arange(ne * nq).reshape(ne, nq)
    for i in range(4):
        cols = np.repeat(2 * np.arange(ne) + i, nq).reshape(ne, nq)
        F[rows, cols] = np.sqrt(wk) * N2[:, i, :]
        H[rows, cols] = np.sqrt(wm) * N[:, i, :]
    return F, H


def assemble_limit_pencil(params: ProblemParams, profile: Profile, mesh: Mesh1D,
                          quad: int = DEFAULT_QUAD, use_numba=None) -> LimitPencil:
    """Assemble the clamped limit pencil ``(K, M)``.

    Quadrature uses ``quad`` Gauss-Legendre points per element. The kernel
    is the numba one unless ``use_numba`` is false or numba is switched off.
    """
    validate_params(params)
    profile.check_positive()
    h, wk, wm, t = _element_weights(params, profile, mesh, quad)
    val, _, d2 = unit_shapes(t)
    nd = mesh.n_dofs
    K = np.zeros((nd, nd))
    M = np.zeros((nd, nd))
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    kernel = _assemble_1d_numba if use_numba else _assemble_1d_numpy
    kernel(h, wk, wm, np.ascontiguousarray(val), np.ascontiguousarray(d2), K, M)
    # product order differs between (i, j) and (j, i); make symmetry exact
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    clamp = np.zeros(nd, dtype=bool)
    clamp[[0, 1, nd - 2, nd - 1]] = True
    F, H = _energy_roots(h, wk, wm, val, d2, nd)
    return LimitPencil(K, distortion_factor(params.n, params.sigma), M, clamp, mesh, params,
                       profile, int(quad), F, H)


def fix_sign(vectors, stride=2):
    """Flip columns so the first significant value coefficient is positive."""
    v = np.array(vectors, copy=True)
    vals = v[0::stride]
    for k in range(v.shape[1]):
        col = vals[:, k]
        big = np.flatnonzero(np.abs(col) > 1e-8 * np.max(np.abs(col)))
        if big.size and col[big[0]] < 0:
            v[:, k] = -v[:, k]
    return v


def _energy_ratio(pencil: LimitPencil, c):
    """Bending-to-mass ratio of coefficient columns, without the distortion factor."""
    if pencil.bending_root is not None:
        num = np.sum((pencil.bending_root @ c) ** 2, axis=0)
        den = np.sum((pencil.mass_root @ c) ** 2, axis=0)
    else:
        num = np.einsum("i...,i...->...", c, pencil.bending @ c)
        den = np.einsum("i...,i...->...", c, pencil.M @ c)
    return num, den


def solve_limit_eigs(pencil: LimitPencil, k_max: int) -> EigenSolution:
    """Lowest ``k_max`` eigenpairs; eigenvectors are M-orthonormal.

    Eigenvalues are the energy ratios of the returned vectors, evaluated
    from the quadrature-point roots.
    """
    sol = finite_pencil_eigs(pencil.bending, pencil.M, k_max, active=pencil.active)
    num, den = _energy_ratio(pencil, sol.vectors)
    sol.values = pencil.distortion * (num / den)
    sol.vectors = fix_sign(sol.vectors)
    return sol


def weighted_normalize(pencil: LimitPencil, vectors):
    """Rescale M-orthonormal vectors to unit norm in the ball-weighted space.

    The weight ``(n-1) w_{n-1} rho^(n-2)`` carries the unit-ball volume that
    ``M`` omits, so this divides by ``sqrt(w_{n-1})``.
    """
    return np.asarray(vectors) / np.sqrt(unit_ball_volume(pencil.params.n - 1))


def limit_modes(pencil: LimitPencil, sol: EigenSolution):
    """Eigenfunctions as fields normalized in the ball-weighted space."""
    v = weighted_normalize(pencil, sol.vectors)
    return [HermiteField(pencil.mesh, v[:, k].copy()) for k in range(v.shape[1])]


def mean_operator(g_top: Callable, g_bottom: Callable) -> Callable:
    """Pointwise average of top and bottom boundary data (n = 2)."""

    def mean(x1):
        return 0.5 * (np.asarray(g_top(x1)) + np.asarray(g_bottom(x1)))

    return mean


def _quad_points(pencil: LimitPencil):
    t, w = gauss_legendre(pencil.quad)
    h = np.diff(pencil.mesh.nodes)
    x = pencil.mesh.nodes[:-1, None] + h[:, None] * t[None, :]
    rho = pencil.profile.evaluate(x)[0]
    wm = (pencil.params.n - 1) * rho ** (pencil.params.n - 2) * w * h[:, None]
    return t, h, x, wm


def _load_vector(pencil: LimitPencil, g: Callable):
    t, h, x, wm = _quad_points(pencil)
    val, _, _ = unit_shapes(t)
    wq = wm * np.asarray(g(x), dtype=float)
    scale = np.ones((len(h), 4))
    scale[:, 1] = h
    scale[:, 3] = h
    fe = np.einsum("eq,iq,ei->ei", wq, val, scale)
    F = np.zeros(pencil.mesh.n_dofs)
    idx = 2 * np.arange(len(h))[:, None] + np.arange(4)[None, :]
    np.add.at(F, idx, fe)
    return F


def _source_least_squares(pencil: LimitPencil, target):
    """Minimize ``|sqrt(D) F V|^2 + |H V - target|^2`` over the clamped subspace.

    Its normal equations are ``(K + M) V = H^T target``; solving through a QR
    factorization of the stacked roots works with ``cond(K + M) ** 0.5``
    instead of ``cond(K + M)``.
    """
    act = pencil.active
    Z = np.vstack([np.sqrt(pencil.distortion) * pencil.bending_root[:, act],
                   pencil.mass_root[:, act]])
    rhs = np.concatenate([np.zeros(pencil.bending_root.shape[0]), target])
    q, r = linalg.qr(Z, mode="economic", check_finite=False)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-14 * diag.max():
        raise SingularSystem("stacked energy roots are rank deficient")
    x = linalg.solve_triangular(r, q.T @ rhs, check_finite=False)
    return expand(x, act)


def solve_limit_source(pencil: LimitPencil, g: Union[np.ndarray, HermiteField, Callable]) -> HermiteField:
    """Solve ``(K + M) V = rhs`` on the clamped subspace.

    ``g`` is a coefficient vector or :class:`HermiteField` (``rhs = M g``) or
    a function of ``x1`` (``rhs`` is its weighted load vector). Boundary data
    given as a top/bottom pair should be averaged with :func:`mean_operator`
    first.
    """
    if callable(g):
        if pencil.mass_root is not None:
            _, _, x, wm = _quad_points(pencil)
            target = (np.sqrt(wm) * np.asarray(g(x), dtype=float)).ravel()
            return HermiteField(pencil.mesh, _source_least_squares(pencil, target))
        rhs = _load_vector(pencil, g)
    else:
        c = g.coeffs if isinstance(g, HermiteField) else np.asarray(g, dtype=float)
        if pencil.mass_root is not None:
            return HermiteField(pencil.mesh, _source_least_squares(pencil, pencil.mass_root @ c))
        rhs = pencil.M @ c
    act = pencil.active
    S = restrict(pencil.K + pencil.M, act)
    try:
        x = solve_spd(S, restrict(rhs, act))
    except NotPositiveDefinite as exc:
        raise SingularSystem(str(exc)) from exc
    return HermiteField(pencil.mesh, expand(x, act))


def rayleigh_1d(pencil: LimitPencil, field) -> float:
    """``c^T K c / c^T M c`` with clamped coefficients of ``field`` zeroed."""
    c = field.coeffs if isinstance(field, HermiteField) else np.asarray(field, dtype=float)
    c = np.where(pencil.clamp, 0.0, c)
    num, den = _energy_ratio(pencil, c)
    if den <= 0:
        raise ZeroTrace("coefficient vector has zero weighted norm")
    return float(pencil.distortion * num / den)
