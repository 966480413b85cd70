import dataclasses
import math

import numpy as np
import pytest
from scipy.linalg import solve_banded

from thinsteklov.core import ProblemParams, Profile, distortion_factor
from thinsteklov.errors import BadCount, OutOfDomain, TooFewFinite, ZeroTrace
from thinsteklov.sturm1d import (
    HermiteField,
    assemble_limit_pencil,
    build_mesh_1d,
    eval_field_1d,
    limit_modes,
    mean_operator,
    rayleigh_1d,
    solve_limit_eigs,
    solve_limit_source,
)

from conftest import SHIPPED_PROFILES, clamped_beam_eigenvalues

P2 = ProblemParams(n=2, sigma=0.0, mu=1.0, l=1.0)


def beam_element(h):
    """Classical Euler-Bernoulli element matrices, slope DOFs unscaled."""
    k = np.array([[12, 6 * h, -12, 6 * h],
                  [6 * h, 4 * h * h, -6 * h, 2 * h * h],
                  [-12, -6 * h, 12, -6 * h],
                  [6 * h, 2 * h * h, -6 * h, 4 * h * h]]) / h ** 3
    m = np.array([[156, 22 * h, 54, -13 * h],
                  [22 * h, 4 * h * h, 13 * h, -3 * h * h],
                  [54, 13 * h, 156, -22 * h],
                  [-13 * h, -3 * h * h, -22 * h, 4 * h * h]]) * h / 420
    return k, m


def limit_eigs(params, profile, N, k_max, quad=4):
    pencil = assemble_limit_pencil(params, profile, build_mesh_1d(params.l, N), quad=quad)
    return pencil, solve_limit_eigs(pencil, k_max)


class TestMesh:
    def test_three_nodes(self):
        m = build_mesh_1d(1.0, 2)
        np.testing.assert_array_equal(m.nodes, [-1.0, 0.0, 1.0])
        assert m.n_dofs == 6

    @pytest.mark.parametrize("N", [0, 1, -3])
    def test_too_few(self, N):
        with pytest.raises(BadCount):
            build_mesh_1d(1.0, N)

    @pytest.mark.parametrize("l,N,nodes", [(1.0, 4, [-1, -0.5, 0, 0.5, 1]), (2.0, 2, [-2, 0, 2])])
    def test_examples(self, l, N, nodes):
        np.testing.assert_array_equal(build_mesh_1d(l, N).nodes, nodes)

    def test_endpoints_exact(self):
        m = build_mesh_1d(0.7, 13)
        assert m.nodes[0] == -0.7 and m.nodes[-1] == 0.7


class TestAssembly:
    def test_matches_classical_beam_matrices(self):
        pencil = assemble_limit_pencil(P2, Profile.constant(1.0), build_mesh_1d(1.0, 2))
        k, m = beam_element(1.0)
        K = np.zeros((6, 6))
        M = np.zeros((6, 6))
        for e in range(2):
            K[2 * e:2 * e + 4, 2 * e:2 * e + 4] += k
            M[2 * e:2 * e + 4, 2 * e:2 * e + 4] += m
        np.testing.assert_allclose(pencil.K, K, atol=1e-13)
        np.testing.assert_allclose(pencil.M, M, atol=1e-14)

    def test_sigma_scaling_of_stiffness(self):
        mesh = build_mesh_1d(1.0, 8)
        k0 = assemble_limit_pencil(P2, Profile.constant(1.0), mesh).K
        k5 = assemble_limit_pencil(ProblemParams(n=2, sigma=0.5), Profile.constant(1.0), mesh).K
        np.testing.assert_allclose(k5, 0.75 * k0, rtol=1e-15)

    def test_symmetric(self, shipped_profile):
        pencil = assemble_limit_pencil(P2, shipped_profile, build_mesh_1d(1.0, 16))
        np.testing.assert_array_equal(pencil.K, pencil.K.T)
        np.testing.assert_array_equal(pencil.M, pencil.M.T)

    def test_quadrature_exact_for_polynomial_profile(self):
        prof = SHIPPED_PROFILES["polynomial"]
        mesh = build_mesh_1d(1.0, 32)
        p4 = assemble_limit_pencil(P2, prof, mesh, quad=4)
        p6 = assemble_limit_pencil(P2, prof, mesh, quad=6)
        assert np.max(np.abs(p4.K - p6.K)) / np.max(np.abs(p6.K)) < 1e-10
        assert np.max(np.abs(p4.M - p6.M)) / np.max(np.abs(p6.M)) < 1e-10
        l4 = solve_limit_eigs(p4, 6).values
        l6 = solve_limit_eigs(p6, 6).values
        assert np.max(np.abs(l4 - l6) / l6) < 1e-10


class TestEigenvalues:
    def test_beam_oracle(self, beam_eigenvalues):
        _, sol = limit_eigs(P2, Profile.constant(1.0), 128, 3)
        # cubic elements: relative error ~ 2.6e-9 * k^4 at this mesh
        assert abs(sol.values[0] / beam_eigenvalues[0] - 1) < 1e-8
        np.testing.assert_allclose(sol.values, beam_eigenvalues[:3], rtol=1e-7)

    def test_beam_oracle_fine_mesh(self, beam_eigenvalues):
        _, sol = limit_eigs(P2, Profile.constant(1.0), 256, 3)
        np.testing.assert_allclose(sol.values, beam_eigenvalues[:3], rtol=1e-8)

    def test_sigma_scaling(self, beam_eigenvalues):
        params = ProblemParams(n=2, sigma=0.3)
        _, sol = limit_eigs(params, Profile.constant(1.0), 64, 3)
        _, ref = limit_eigs(P2, Profile.constant(1.0), 64, 3)
        np.testing.assert_allclose(sol.values, 0.91 * ref.values, rtol=1e-12)

    def test_three_dimensional_beam(self):
        _, sol = limit_eigs(ProblemParams(n=3, sigma=0.0), Profile.constant(1.0), 128, 1)
        assert sol.values[0] == pytest.approx(15.6426, abs=5e-4)
        beta = clamped_beam_eigenvalues(1)[0]
        assert sol.values[0] == pytest.approx(beta / 2.0, rel=1e-8)

    def test_half_length(self):
        _, sol = limit_eigs(ProblemParams(n=2, sigma=0.0, l=0.5), Profile.constant(1.0), 64, 2)
        np.testing.assert_allclose(sol.values, clamped_beam_eigenvalues(2, l=0.5), rtol=1e-6)

    def test_convergence_order(self, beam_eigenvalues):
        errs = []
        for N in (16, 32):
            _, sol = limit_eigs(P2, Profile.constant(1.0), N, 1)
            errs.append(abs(sol.values[0] - beam_eigenvalues[0]))
        assert errs[0] / errs[1] >= 12

    @pytest.mark.parametrize("sigma", [0.3, 0.6])
    def test_eigenvectors_independent_of_sigma(self, shipped_profile, sigma):
        _, s0 = limit_eigs(P2, shipped_profile, 64, 4)
        _, s1 = limit_eigs(ProblemParams(n=2, sigma=sigma), shipped_profile, 64, 4)
        assert np.max(np.abs(s0.vectors - s1.vectors)) < 1e-10
        np.testing.assert_allclose(s1.values, distortion_factor(2, sigma) * s0.values, rtol=1e-13)

    def test_clamped_ends(self, shipped_profile):
        pencil, sol = limit_eigs(P2, shipped_profile, 32, 4)
        for f in limit_modes(pencil, sol):
            u, du, _ = eval_field_1d(f, np.array([-1.0, 1.0]))
            assert np.max(np.abs(u)) < 1e-14 and np.max(np.abs(du)) < 1e-14

    def test_m_orthonormal(self, shipped_profile):
        pencil, sol = limit_eigs(P2, shipped_profile, 64, 5)
        g = sol.vectors.T @ pencil.M @ sol.vectors
        np.testing.assert_allclose(g, np.eye(5), atol=1e-10)

    def test_too_many_requested(self):
        pencil = assemble_limit_pencil(P2, Profile.constant(1.0), build_mesh_1d(1.0, 2))
        with pytest.raises(TooFewFinite):
            solve_limit_eigs(pencil, 3)

    def test_limit_modes_ball_normalized(self):
        params = ProblemParams(n=3, sigma=0.2)
        pencil, sol = limit_eigs(params, Profile.constant(1.0), 32, 2)
        modes = limit_modes(pencil, sol)
        for f in modes:
            # weight (n-1) w_{n-1} rho^(n-2) with w_2 = pi
            assert math.pi * f.coeffs @ pencil.M @ f.coeffs == pytest.approx(1.0, rel=1e-12)


def clamped_unit_load_solution(x, l=1.0):
    """Exact solution of V'''' + V = 1, V = V' = 0 at +-l."""
    a = 1.0 / math.sqrt(2.0)
    def basis(t):
        c, ch, s, sh = np.cos(a * t), np.cosh(a * t), np.sin(a * t), np.sinh(a * t)
        f1, f2 = ch * c, sh * s
        d1 = a * (sh * c - ch * s)
        d2 = a * (ch * s + sh * c)
        return f1, f2, d1, d2
    f1, f2, d1, d2 = basis(l)
    A, B = np.linalg.solve([[f1, f2], [d1, d2]], [-1.0, 0.0])
    g1, g2, _, _ = basis(np.asarray(x))
    return 1.0 + A * g1 + B * g2


def fd_unit_load(n_int, l=1.0):
    """Second-order difference solution on n_int interior points.

    Ghost values come from V = 0 and a centred V' = 0 at each end.
    """
    h = 2 * l / (n_int + 1)
    main = np.full(n_int, 6.0 / h ** 4 + 1.0)
    main[0] += 1.0 / h ** 4
    main[-1] += 1.0 / h ** 4
    ab = np.zeros((5, n_int))
    ab[0, 2:] = 1.0 / h ** 4
    ab[1, 1:] = -4.0 / h ** 4
    ab[2] = main
    ab[3, :-1] = -4.0 / h ** 4
    ab[4, :-2] = 1.0 / h ** 4
    v = solve_banded((2, 2), ab, np.ones(n_int))
    x = -l + h * np.arange(1, n_int + 1)
    return x, v


class TestSource:
    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_eigenfunction_source(self, shipped_profile, k):
        pencil, sol = limit_eigs(P2, shipped_profile, 64, 4)
        v = sol.vectors[:, k - 1]
        V = solve_limit_source(pencil, (1.0 + sol.values[k - 1]) * v)
        err = np.sqrt((V.coeffs - v) @ pencil.M @ (V.coeffs - v))
        assert err <= 1e-10

    def test_normal_equation_fallback(self, shipped_profile):
        pencil, sol = limit_eigs(P2, shipped_profile, 64, 2)
        plain = dataclasses.replace(pencil, bending_root=None, mass_root=None)
        for g in (sol.vectors[:, 1], lambda x: np.cos(x)):
            a = solve_limit_source(pencil, g).coeffs
            b = solve_limit_source(plain, g).coeffs
            assert np.sqrt((a - b) @ pencil.M @ (a - b)) < 1e-9 * np.sqrt(a @ pencil.M @ a)

    def test_zero_load(self):
        pencil = assemble_limit_pencil(P2, Profile.constant(1.0), build_mesh_1d(1.0, 16))
        V = solve_limit_source(pencil, lambda x: np.zeros_like(x))
        assert np.all(V.coeffs == 0.0)

    def test_unit_load_analytic(self):
        pencil = assemble_limit_pencil(P2, Profile.constant(1.0), build_mesh_1d(1.0, 128))
        V = solve_limit_source(pencil, lambda x: np.ones_like(x))
        x = pencil.mesh.nodes
        exact = clamped_unit_load_solution(x)
        assert np.max(np.abs(V.values - exact)) / np.max(np.abs(exact)) < 1e-8

    def test_unit_load_difference_oracle(self):
        # three-level Richardson removes the h^2 and h^4 terms; finer meshes
        # lose to roundoff growing like h^-4
        levels = [fd_unit_load(40 * 2 ** i - 1) for i in range(3)]
        x = levels[0][0]
        sols = [v[2 ** i - 1::2 ** i] for i, (_, v) in enumerate(levels)]
        for j in (1, 2):
            f = 4.0 ** j
            sols = [(f * sols[i + 1] - sols[i]) / (f - 1) for i in range(len(sols) - 1)]
        rich = sols[0]
        exact = clamped_unit_load_solution(x)
        assert np.max(np.abs(rich - exact)) / np.max(np.abs(exact)) < 1e-8
        pencil = assemble_limit_pencil(P2, Profile.constant(1.0), build_mesh_1d(1.0, 80))
        V = solve_limit_source(pencil, lambda t: np.ones_like(t))
        fe = eval_field_1d(V, x)[0]
        assert np.max(np.abs(fe - rich)) / np.max(np.abs(rich)) < 1e-8

    def test_field_argument(self):
        pencil, sol = limit_eigs(P2, Profile.constant(1.0), 32, 1)
        f = HermiteField(pencil.mesh, sol.vectors[:, 0])
        V = solve_limit_source(pencil, f)
        np.testing.assert_allclose(V.coeffs, f.coeffs / (1 + sol.values[0]), atol=1e-12)


class TestHelpers:
    def test_mean_operator(self):
        m = mean_operator(lambda x: np.ones_like(x), lambda x: -np.ones_like(x))
        np.testing.assert_array_equal(m(np.linspace(-1, 1, 5)), 0.0)
        m = mean_operator(lambda x: x, lambda x: x)
        np.testing.assert_array_equal(m(np.array([0.3, -0.2])), [0.3, -0.2])
        m = mean_operator(lambda x: x, lambda x: 3 * x)
        np.testing.assert_allclose(m(np.array([0.5, -1.0])), [1.0, -2.0], rtol=1e-15)

    def test_eval_reproduces_cubic(self):
        mesh = build_mesh_1d(1.0, 5)
        f = lambda x: 2 * x ** 3 - x + 0.5
        df = lambda x: 6 * x ** 2 - 1
        field = HermiteField.interpolate(mesh, f, df)
        x = np.linspace(-1, 1, 41)
        u, du, d2u = eval_field_1d(field, x)
        np.testing.assert_allclose(u, f(x), atol=1e-14)
        np.testing.assert_allclose(du, df(x), atol=1e-13)
        np.testing.assert_allclose(d2u, 12 * x, atol=1e-12)

    def test_eval_nodal(self):
        mesh = build_mesh_1d(1.0, 4)
        rng = np.random.default_rng(0)
        field = HermiteField(mesh, rng.standard_normal(mesh.n_dofs))
        u, du, _ = eval_field_1d(field, mesh.nodes)
        np.testing.assert_allclose(u, field.values, atol=1e-15)
        np.testing.assert_allclose(du, field.slopes, atol=1e-14)

    def test_eval_zero_field(self):
        field = HermiteField.zeros(build_mesh_1d(1.0, 4))
        assert eval_field_1d(field, 0.3) == (0.0, 0.0, 0.0)

    def test_eval_value_only_coefficient(self):
        field = HermiteField.zeros(build_mesh_1d(1.0, 4))
        field.coeffs[2 * 2] = 1.0
        u, du, _ = eval_field_1d(field, 0.0)
        assert (u, du) == (1.0, 0.0)

    def test_eval_out_of_domain(self):
        field = HermiteField.zeros(build_mesh_1d(1.0, 4))
        with pytest.raises(OutOfDomain):
            eval_field_1d(field, 1.1)

    def test_rayleigh_of_eigenvector(self, shipped_profile):
        pencil, sol = limit_eigs(P2, shipped_profile, 32, 2)
        for k in range(2):
            assert rayleigh_1d(pencil, sol.vectors[:, k]) == pytest.approx(sol.values[k], rel=1e-12)

    def test_rayleigh_scaling(self):
        pencil = assemble_limit_pencil(P2, SHIPPED_PROFILES["cosine"], build_mesh_1d(1.0, 16))
        c = np.random.default_rng(1).standard_normal(pencil.mesh.n_dofs)
        assert rayleigh_1d(pencil, 10 * c) == pytest.approx(rayleigh_1d(pencil, c), rel=1e-13)

    def test_rayleigh_zero(self):
        pencil = assemble_limit_pencil(P2, Profile.constant(1.0), build_mesh_1d(1.0, 4))
        with pytest.raises(ZeroTrace):
            rayleigh_1d(pencil, np.zeros(pencil.mesh.n_dofs))

    def test_rayleigh_upper_bound(self):
        pencil, sol = limit_eigs(P2, Profile.constant(1.0), 32, 1)
        rng = np.random.default_rng(2)
        for _ in range(20):
            c = rng.standard_normal(pencil.mesh.n_dofs)
            assert rayleigh_1d(pencil, c) >= sol.values[0] * (1 - 1e-12)
