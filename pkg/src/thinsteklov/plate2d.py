"""Bogner-Fox-Schmidt plate elements for the thin-domain Steklov problem (n = 2).

The physical domain ``{|x2| < eps rho(x1)}`` is the image of the reference
rectangle ``Q = (-l, l) x (-1, 1)`` under ``x = (X, eps rho(X) y)``. Fields
live on Q as bicubic Hermite interpolants with nodal coefficients
``(u, u_X, u_y, u_Xy)``; physical second derivatives are recovered at each
quadrature point from the chain-rule table of :func:`pullback_second_derivatives`.

Global coefficient index of node ``(i, j)`` (``i`` along X, ``j`` along y)
and slot ``d`` is ``4 * (j * (Nx + 1) + i) + d``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import maybe_njit
from .core import Profile, ProblemParams, profile_eval, validate_params
from .errors import (
    BadCount,
    BadDimension,
    NotPositiveDefinite,
    NonPositive,
    OutOfDomain,
    SingularSystem,
    ZeroTrace,
)
from .hermite import eval_hermite, gauss_legendre, unit_shapes
from .pencil import EigenSolution, expand, finite_pencil_eigs, restrict, solve_spd
from .sturm1d import fix_sign

DEFAULT_QUAD = 4
SIDES = ("top", "bottom")


@dataclass(frozen=True)
class Mesh2D:
    xs: np.ndarray
    ys: np.ndarray

    @property
    def nx(self) -> int:
        return len(self.xs) - 1

    @property
    def ny(self) -> int:
        return len(self.ys) - 1

    @property
    def l(self) -> float:
        return float(self.xs[-1])

    @property
    def n_nodes(self) -> int:
        return len(self.xs) * len(self.ys)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def n_dofs(self) -> int:
        return 4 * self.n_nodes

    def node(self, i, j):
        return j * len(self.xs) + i

    def dof(self, i, j, d):
        return 4 * self.node(i, j) + d


def build_mesh_2d(l: float, Nx: int, Ny: int) -> Mesh2D:
    """Uniform tensor mesh of ``Nx x Ny`` rectangles on ``(-l, l) x (-1, 1)``."""
    if int(Nx) != Nx or Nx < 2:
        raise BadCount(f"Nx must be >= 2, got {Nx!r}")
    if int(Ny) != Ny or Ny < 1:
        raise BadCount(f"Ny must be >= 1, got {Ny!r}")
    xs = np.linspace(-l, l, int(Nx) + 1)
    ys = np.linspace(-1.0, 1.0, int(Ny) + 1)
    xs[0], xs[-1] = -l, l
    ys[0], ys[-1] = -1.0, 1.0
    return Mesh2D(xs, ys)


@dataclass
class BfsField:
    """Bicubic C1 field on the reference rectangle."""

    mesh: Mesh2D
    coeffs: np.ndarray

    def slot(self, d):
        """Coefficient slot ``d`` as an ``(Ny+1, Nx+1)`` array."""
        return self.coeffs[d::4].reshape(len(self.mesh.ys), len(self.mesh.xs))

    @classmethod
    def zeros(cls, mesh: Mesh2D) -> "BfsField":
        return cls(mesh, np.zeros(mesh.n_dofs))

    @classmethod
    def interpolate(cls, mesh: Mesh2D, u, u_X, u_y, u_Xy) -> "BfsField":
        """Hermite interpolant from callables of reference ``(X, y)``."""
        X, Y = np.meshgrid(mesh.xs, mesh.ys)
        c = np.empty(mesh.n_dofs)
        for d, f in enumerate((u, u_X, u_y, u_Xy)):
            c[d::4] = np.broadcast_to(f(X, Y), X.shape).ravel()
        return cls(mesh, c)


@dataclass(frozen=True)
class PullbackTable:
    """Physical derivatives as linear combinations of reference ones.

    Rows of ``coeffs``: d/dx1, d/dx2, d2/dx1^2, d2/dx1dx2, d2/dx2^2.
    Columns: u_X, u_y, u_XX, u_Xy, u_yy. ``jacobian`` is ``eps * rho``.
    """

    coeffs: np.ndarray
    jacobian: float

    def apply(self, ref_derivs):
        return self.coeffs @ np.asarray(ref_derivs, dtype=float)


def _table_entries(eps, rho, drho, d2rho, y):
    a = -y * drho / rho
    b = 1.0 / (eps * rho)
    c = y * (2.0 * drho * drho / (rho * rho) - d2rho / rho)
    d12 = -b * drho / rho
    return a, b, c, d12


def pullback_second_derivatives(params: ProblemParams, profile: Profile, point) -> PullbackTable:
    """Chain-rule table for ``x = (X, eps rho(X) y)`` at reference ``(X, y)``."""
    X, y = point
    eps = params.epsilon
    if eps is None or eps <= 0:
        raise NonPositive("epsilon must be set and positive for 2D operations")
    rho, drho, d2rho = profile_eval(profile, X)
    a, b, c, d12 = _table_entries(eps, rho, drho, d2rho, y)
    T = np.array([
        [1.0, a, 0.0, 0.0, 0.0],
        [0.0, b, 0.0, 0.0, 0.0],
        [0.0, c, 1.0, 2.0 * a, a * a],
        [0.0, d12, 0.0, b, a * b],
        [0.0, 0.0, 0.0, 0.0, b * b],
    ])
    return PullbackTable(T, eps * rho)


@dataclass
class PlatePencil:
    A: np.ndarray
    B: np.ndarray
    clamp: np.ndarray
    mesh: Mesh2D
    params: ProblemParams
    profile: Profile
    quad: int

    @property
    def active(self):
        return ~self.clamp


def _scaled_tables(t, h):
    """Physical 1D shape tables ``(ne, 4, nq)`` for element lengths ``h``."""
    val, d1, d2 = unit_shapes(t)
    s = np.ones((len(h), 4))
    s[:, 1] = h
    s[:, 3] = h
    v = val[None] * s[:, :, None]
    dv = d1[None] * (s / h[:, None])[:, :, None]
    ddv = d2[None] * (s / (h * h)[:, None])[:, :, None]
    return v, dv, ddv


def _local_index():
    # local slot m -> (ci, cj, dx, dy); m = 4 * (2 * cj + ci) + (dx + 2 * dy)
    out = np.empty((16, 4), dtype=np.int64)
    for cj in range(2):
        for ci in range(2):
            for d in range(4):
                out[4 * (2 * cj + ci) + d] = (ci, cj, d % 2, d // 2)
    return out


_LOCAL = _local_index()


def _element_dofs(mesh: Mesh2D):
    """Global indices ``(Nx*Ny, 16)`` in local slot order, element ``e = ey*Nx + ex``."""
    nxp = len(mesh.xs)
    ex, ey = np.meshgrid(np.arange(mesh.nx), np.arange(mesh.ny))
    ex = ex.ravel()
    ey = ey.ravel()
    ci, cj, dx, dy = _LOCAL.T
    node = (ey[:, None] + cj[None, :]) * nxp + ex[:, None] + ci[None, :]
    return 4 * node + (dx + 2 * dy)[None, :]


@maybe_njit
def _volume_numba(Xv, Xd, Xdd, Yv, Yd, Ydd, yq, wxh, wyh,
                  rho, drho, d2rho, eps, sigma, local, dofs, A):
    nx = Xv.shape[0]
    ny = Yv.shape[0]
    nqx = Xv.shape[2]
    nqy = Yv.shape[2]
    H11 = np.empty(16)
    H12 = np.empty(16)
    H22 = np.empty(16)
    Ke = np.empty((16, 16))
    for ey in range(ny):
        for ex in range(nx):
            Ke[:, :] = 0.0
            for qx in range(nqx):
                r = rho[ex, qx]
                rp = drho[ex, qx]
                rpp = d2rho[ex, qx]
                b = 1.0 / (eps * r)
                d12 = -b * rp / r
                for qy in range(nqy):
                    y = yq[ey, qy]
                    a = -y * rp / r
                    c = y * (2.0 * rp * rp / (r * r) - rpp / r)
                    wj = wxh[ex, qx] * wyh[ey, qy] * eps * r
                    for m in range(16):
                        px = 2 * local[m, 0] + local[m, 2]
                        py = 2 * local[m, 1] + local[m, 3]
                        f_y = Xv[ex, px, qx] * Yd[ey, py, qy]
                        f_XX = Xdd[ex, px, qx] * Yv[ey, py, qy]
                        f_Xy = Xd[ex, px, qx] * Yd[ey, py, qy]
                        f_yy = Xv[ex, px, qx] * Ydd[ey, py, qy]
                        H11[m] = f_XX + 2.0 * a * f_Xy + a * a * f_yy + c * f_y
                        H12[m] = b * f_Xy + a * b * f_yy + d12 * f_y
                        H22[m] = b * b * f_yy
                    for m in range(16):
                        lm = H11[m] + H22[m]
                        for n in range(m, 16):
                            v = (1.0 - sigma) * (H11[m] * H11[n] + 2.0 * H12[m] * H12[n]
                                                 + H22[m] * H22[n])
                            v += sigma * lm * (H11[n] + H22[n])
                            Ke[m, n] += wj * v
            e = ey * nx + ex
            for m in range(16):
                gm = dofs[e, m]
                A[gm, gm] += Ke[m, m]
                for n in range(m + 1, 16):
                    gn = dofs[e, n]
                    A[gm, gn] += Ke[m, n]
                    A[gn, gm] += Ke[m, n]


def _volume_numpy(Xv, Xd, Xdd, Yv, Yd, Ydd, yq, wxh, wyh,
                  rho, drho, d2rho, eps, sigma, local, dofs, A):
    px = 2 * local[:, 0] + local[:, 2]
    py = 2 * local[:, 1] + local[:, 3]
    # axes: (ey, ex, qy, qx, m)
    def prod(xt, yt):
        return yt[:, None, py, :].transpose(0, 1, 3, 2)[:, :, :, None, :] * \
            xt[None, :, px, :].transpose(0, 1, 3, 2)[:, :, None, :, :]

    f_y = prod(Xv, Yd)
    f_XX = prod(Xdd, Yv)
    f_Xy = prod(Xd, Yd)
    f_yy = prod(Xv, Ydd)
    r = rho.T[None, None, :, :, None].transpose(0, 3, 1, 2, 4)
    rp = drho.T[None, None, :, :, None].transpose(0, 3, 1, 2, 4)
    rpp = d2rho.T[None, None, :, :, None].transpose(0, 3, 1, 2, 4)
    y = yq[:, None, :, None, None]
    a = -y * rp / r
    b = 1.0 / (eps * r)
    c = y * (2.0 * rp * rp / (r * r) - rpp / r)
    d12 = -b * rp / r
    H11 = f_XX + 2.0 * a * f_Xy + a * a * f_yy + c * f_y
    H12 = b * f_Xy + a * b * f_yy + d12 * f_y
    H22 = b * b * f_yy
    wj = (wyh[:, None, :, None] * wxh[None, :, None, :] * eps * r[..., 0])
    lap = H11 + H22
    Ke = (1.0 - sigma) * (
        np.einsum("abpq,abpqm,abpqn->abmn", wj, H11, H11)
        + 2.0 * np.einsum("abpq,abpqm,abpqn->abmn", wj, H12, H12)
        + np.einsum("abpq,abpqm,abpqn->abmn", wj, H22, H22)
    ) + sigma * np.einsum("abpq,abpqm,abpqn->abmn", wj, lap, lap)
    Ke = Ke.reshape(-1, 16, 16)
    rows = np.broadcast_to(dofs[:, :, None], Ke.shape)
    cols = np.broadcast_to(dofs[:, None, :], Ke.shape)
    np.add.at(A, (rows, cols), Ke)


def _boundary_forms(params, profile, mesh, quad, A, B):
    """Add the mu-weighted normal-derivative form to A and the trace mass to B."""
    eps, mu = params.epsilon, params.mu
    t, w = gauss_legendre(quad)
    hx = np.diff(mesh.xs)
    Xv, Xd, _ = _scaled_tables(t, hx)
    x = mesh.xs[:-1, None] + hx[:, None] * t[None, :]
    rho, drho, _ = profile.evaluate(x)
    s = np.sqrt(1.0 + (eps * drho) ** 2)
    wq = w[None, :] * hx[:, None] * s
    nxp = len(mesh.xs)
    for side in SIDES:
        ysgn = 1.0 if side == "top" else -1.0
        j = mesh.ny if side == "top" else 0
        nu1 = -eps * drho / s
        nu2 = ysgn / s
        a = -ysgn * drho / rho
        b = 1.0 / (eps * rho)
        # slots per edge element: (ci, d) -> 8 coefficients
        tr = np.zeros((mesh.nx, 8, len(t)))
        nd = np.zeros((mesh.nx, 8, len(t)))
        idx = np.zeros((mesh.nx, 8), dtype=np.int64)
        for ci in range(2):
            for d in range(4):
                k = 4 * ci + d
                p = 2 * ci + d % 2
                idx[:, k] = 4 * (j * nxp + np.arange(mesh.nx) + ci) + d
                if d < 2:
                    tr[:, k] = Xv[:, p]
                    nd[:, k] = nu1 * Xd[:, p]
                else:
                    nd[:, k] = (nu1 * a + nu2 * b) * Xv[:, p]
        Ae = mu * np.einsum("eq,emq,enq->emn", wq, nd, nd)
        Be = np.einsum("eq,emq,enq->emn", wq, tr, tr)
        rows = np.broadcast_to(idx[:, :, None], Ae.shape)
        cols = np.broadcast_to(idx[:, None, :], Ae.shape)
        np.add.at(A, (rows, cols), Ae)
        np.add.at(B, (rows, cols), Be)


def clamp_mask(mesh: Mesh2D):
    """All four slots of every node on X = -l and X = +l."""
    nodes = np.zeros((len(mesh.ys), len(mesh.xs)), dtype=bool)
    nodes[:, 0] = True
    nodes[:, -1] = True
    return np.repeat(nodes.ravel(), 4)


def assemble_plate_forms(params: ProblemParams, profile: Profile, mesh: Mesh2D,
                         quad: int = DEFAULT_QUAD, use_numba=None) -> PlatePencil:
    """Assemble ``A`` (plate energy plus mu boundary term) and ``B`` (trace mass)."""
    validate_params(params)
    if params.n != 2:
        raise BadDimension("the plate solver is two-dimensional (n = 2)")
    if params.epsilon is None:
        raise NonPositive("epsilon must be set for 2D assembly")
    profile.check_positive()
    eps, sigma = float(params.epsilon), float(params.sigma)

    t, w = gauss_legendre(quad)
    hx = np.diff(mesh.xs)
    hy = np.diff(mesh.ys)
    Xv, Xd, Xdd = _scaled_tables(t, hx)
    Yv, Yd, Ydd = _scaled_tables(t, hy)
    xq = mesh.xs[:-1, None] + hx[:, None] * t[None, :]
    yq = mesh.ys[:-1, None] + hy[:, None] * t[None, :]
    rho, drho, d2rho = (np.ascontiguousarray(v) for v in profile.evaluate(xq))
    wxh = w[None, :] * hx[:, None]
    wyh = w[None, :] * hy[:, None]

    nd = mesh.n_dofs
    A = np.zeros((nd, nd))
    B = np.zeros((nd, nd))
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    kernel = _volume_numba if use_numba else _volume_numpy
    kernel(Xv, Xd, Xdd, Yv, Yd, Ydd, yq, wxh, wyh, rho, drho, d2rho,
           eps, sigma, _LOCAL, _element_dofs(mesh), A)
    _boundary_forms(params, profile, mesh, quad, A, B)
    # einsum element blocks are symmetric only to rounding
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    return PlatePencil(A, B, clamp_mask(mesh), mesh, params, profile, int(quad))


def solve_steklov_2d(pencil: PlatePencil, k_max: int) -> EigenSolution:
    """Lowest ``k_max`` Steklov eigenpairs, eigenvectors orthonormal in L2(Gamma)."""
    sol = finite_pencil_eigs(pencil.A, pencil.B, k_max, active=pencil.active)
    sol.vectors = fix_sign(sol.vectors, stride=4)
    return sol


def solve_penalized_source(pencil: PlatePencil, f, eps_penalty: float) -> BfsField:
    """Solve ``(A + tau B) u = B f`` on the clamped subspace, ``tau = eps_penalty``."""
    if not eps_penalty > 0:
        raise NonPositive("penalty must be positive")
    c = f.coeffs if isinstance(f, BfsField) else np.asarray(f, dtype=float)
    act = pencil.active
    S = restrict(pencil.A + eps_penalty * pencil.B, act)
    try:
        u = solve_spd(S, restrict(pencil.B @ c, act))
    except NotPositiveDefinite as exc:
        raise SingularSystem(str(exc)) from exc
    return BfsField(pencil.mesh, expand(u, act))


def _row(field: BfsField, side: str):
    if side not in SIDES:
        raise ValueError(f"side must be 'top' or 'bottom', got {side!r}")
    return -1 if side == "top" else 0


def _check_x(mesh, x1):
    x = np.asarray(x1, dtype=float)
    if np.any(np.abs(x) > mesh.l * (1 + 1e-12)):
        raise OutOfDomain(f"x1 outside [-{mesh.l}, {mesh.l}]")
    return x


def trace_on_gamma(field: BfsField, side: str, x1):
    """Value of the field on ``y = +1`` (top) or ``y = -1`` (bottom)."""
    j = _row(field, side)
    x = _check_x(field.mesh, x1)
    u = field.slot(0)[j]
    ux = field.slot(1)[j]
    return eval_hermite(field.mesh.xs, u, ux, x)[0]


def normal_derivative_on_gamma(params: ProblemParams, profile: Profile, field: BfsField, side: str, x1):
    """Outward normal derivative ``grad u . nu`` in physical coordinates."""
    j = _row(field, side)
    x = _check_x(field.mesh, x1)
    xs = field.mesh.xs
    _, u_X, _ = eval_hermite(xs, field.slot(0)[j], field.slot(1)[j], x)
    u_y = eval_hermite(xs, field.slot(2)[j], field.slot(3)[j], x)[0]
    rho, drho, _ = profile.evaluate(x)
    if np.any(rho <= 0):
        raise OutOfDomain("profile not positive at evaluation point")
    eps = params.epsilon
    ysgn = 1.0 if side == "top" else -1.0
    s = np.sqrt(1.0 + (eps * drho) ** 2)
    du1 = u_X - ysgn * drho / rho * u_y
    du2 = u_y / (eps * rho)
    return (-eps * drho * du1 + ysgn * du2) / s


def rayleigh_plate(pencil: PlatePencil, field) -> float:
    """``c^T A c / c^T B c`` over the unclamped coefficients of ``field``."""
    c = field.coeffs if isinstance(field, BfsField) else np.asarray(field, dtype=float)
    act = pencil.active
    c = restrict(c, act)
    den = c @ restrict(pencil.B, act) @ c
    if den <= 0:
        raise ZeroTrace("field has zero trace on Gamma")
    return float(c @ restrict(pencil.A, act) @ c / den)
