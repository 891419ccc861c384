import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdfem import _pykernels
from pdfem._backend import BACKEND, kernels
from pdfem.kernel import (NonlocalContext, bond_strain, boundary_function, build_neighbor_table, crosses_crack,
                          evaluate_point, force_density, hydrostatic_strain, linearized_force_density,
                          sever_mask, smoothstep)
from pdfem.material import plexiglass
from pdfem.mesh import CrackSegment, build_uniform_mesh

EPS = 0.004


def brute_pairs(pos, eps):
    d = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
    i, j = np.nonzero((d < eps) & (d > 0))
    keep = i < j
    return set(zip(i[keep].tolist(), j[keep].tolist()))


# positions on a 1 um lattice: distinct points never have a squared distance that underflows
coord = st.integers(0, 20000).map(lambda k: k * 1e-6)
points = st.lists(st.tuples(coord, coord.map(lambda y: 0.65 * y)), min_size=2, max_size=60)


class TestNeighborSearch:
    @given(points, st.floats(0.001, 0.01))
    def test_matches_brute_force(self, pts, eps):
        pos = np.array(pts)
        pi, pj = kernels.build_pairs(pos, eps)
        assert set(zip(pi.tolist(), pj.tolist())) == brute_pairs(pos, eps)

    @given(points)
    def test_fallback_matches_brute_force(self, pts):
        pos = np.array(pts)
        pi, pj = _pykernels.build_pairs(pos, 0.005)
        assert set(zip(pi.tolist(), pj.tolist())) == brute_pairs(pos, 0.005)

    def test_sorted_and_canonical(self, small_ctx):
        t = small_ctx.table
        assert np.all(t.pi < t.pj)
        key = t.pi.astype(np.int64) * t.num_points + t.pj
        assert np.all(np.diff(key) > 0)

    def test_relation_symmetric(self, small_ctx):
        sets = small_ctx.table.neighbor_sets()
        for p in range(0, small_ctx.table.num_points, 97):
            assert p not in sets[p]
            for q in sets[p]:
                assert p in sets[q]

    def test_entries_geometry(self, small_ctx):
        t = small_ctx.table
        e = t.entries(10)
        np.testing.assert_allclose(np.linalg.norm(e["dir"], axis=1), 1.0)
        assert np.all((e["dist"] > 0) & (e["dist"] < EPS))
        np.testing.assert_allclose(t.positions[e["q"]], t.positions[10] + e["dist"][:, None] * e["dir"])

    def test_nonpositive_horizon(self):
        with pytest.raises(ValueError):
            build_neighbor_table(np.zeros((3, 2)), 0.0)


class TestCrackVisibility:
    crack = CrackSegment((0.0, 0.0), (0.0, 1.0))

    def test_crossing(self):
        assert crosses_crack([-0.5, 0.5], [0.5, 0.5], self.crack)[0]

    def test_touching_does_not_count(self):
        assert not crosses_crack([0.0, 0.5], [0.5, 0.5], self.crack)[0]
        assert not crosses_crack([-0.5, 1.0], [0.5, 1.0], self.crack)[0]

    def test_beyond_tip(self):
        assert not crosses_crack([-0.5, 1.2], [0.5, 1.2], self.crack)[0]

    def test_parallel(self):
        assert not crosses_crack([0.1, 0.1], [0.1, 0.9], self.crack)[0]

    @given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-0.5, 1.5)), min_size=2, max_size=30))
    def test_sever_mask_matches_segment_test(self, pts):
        pos = np.array(pts)
        pi, pj = _pykernels.build_pairs(pos, 0.8)
        mask = sever_mask(pos, pi, pj, self.crack)
        expect = np.array([not crosses_crack(pos[a], pos[b], self.crack)[0] for a, b in zip(pi, pj)], dtype=bool)
        np.testing.assert_array_equal(mask.astype(bool), expect)

    def test_table_severs_bonds(self):
        mesh = build_uniform_mesh(0.016, 0.016, 0.002, CrackSegment((0.008, 0.0), (0.008, 0.008)))
        ctx = NonlocalContext(mesh, plexiglass(EPS))
        t = ctx.table
        a, b = t.positions[t.pi], t.positions[t.pj]
        cut = ~t.intact.astype(bool)
        assert cut.any()
        # every severed bond straddles x = 0.008 below the tip
        assert np.all((a[cut, 0] - 0.008) * (b[cut, 0] - 0.008) < 0)


class TestBoundaryFunction:
    def test_profile(self):
        w = boundary_function(np.array([[0.0, 0.01], [EPS / 2, 0.01], [EPS, 0.01], [0.01, 0.01]]), 0.02, 0.02, EPS)
        np.testing.assert_allclose(w, [0.0, 0.5, 1.0, 1.0])

    def test_smoothstep_closed_form(self):
        t = np.linspace(0, 1, 11)
        np.testing.assert_allclose(smoothstep(t), 3 * t**2 - 2 * t**3)

    def test_product_mode(self):
        x = np.array([[EPS / 2, EPS / 2], [0.01, 0.01], [0.0, 0.01]])
        w = boundary_function(x, 0.02, 0.02, EPS, "product")
        np.testing.assert_allclose(w, [0.25, 1.0, 0.0])

    def test_none_mode(self):
        assert np.all(boundary_function(np.zeros((4, 2)), 1.0, 1.0, EPS, "none") == 1.0)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            boundary_function(np.zeros((1, 2)), 1.0, 1.0, EPS, "tanh")


class TestBondStrain:
    @given(st.floats(-1e-3, 1e-3), st.floats(-1e-3, 1e-3))
    def test_translation_exact(self, tx, ty):
        x = np.array([[0.0, 0.0]])
        y = np.array([[0.003, 0.001]])
        d = y - x
        S = bond_strain(np.array([[tx, ty]]), np.array([[tx, ty]]), np.linalg.norm(d, axis=1), d / np.linalg.norm(d))
        assert S[0] == 0.0

    def test_rotation_second_order(self):
        xi = np.array([0.003, 0.001])
        dist = np.linalg.norm(xi)
        vals = []
        for a in (1e-2, 5e-3):
            R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
            vals.append(bond_strain((R - np.eye(2)) @ xi, np.zeros(2), dist, xi / dist))
            # exact value cos(a) - 1
            assert vals[-1] == pytest.approx(math.cos(a) - 1.0, rel=1e-9)
        assert vals[0] / vals[1] == pytest.approx(4.0, rel=1e-3)


class TestPairKernels:
    """Pair-loop kernels against the per-point reference implementation."""

    def test_theta_matches_reference(self, small_ctx, rng):
        u = rng.standard_normal((len(small_ctx.quad), 2)) * 1e-6
        theta = small_ctx.theta(u)
        for p in range(0, len(theta), 211):
            assert theta[p] == pytest.approx(hydrostatic_strain(p, u, small_ctx.table, small_ctx.material),
                                             rel=1e-10, abs=1e-22)

    @pytest.mark.parametrize("linearized", [False, True])
    def test_force_matches_reference(self, small_ctx, rng, linearized):
        u = rng.standard_normal((len(small_ctx.quad), 2)) * 1e-6
        theta = small_ctx.theta(u)
        F = small_ctx.force_density(u, theta, linearized=linearized)
        ref = linearized_force_density if linearized else force_density
        scale = np.abs(F).max()
        for p in range(0, len(theta), 211):
            np.testing.assert_allclose(F[p], ref(p, u, theta, small_ctx.table, small_ctx.material),
                                       rtol=1e-9, atol=1e-12 * scale)

    def test_theta_length_checked(self, small_ctx):
        u = np.zeros((len(small_ctx.quad), 2))
        with pytest.raises(ValueError):
            force_density(0, u, np.zeros(3), small_ctx.table, small_ctx.material)

    def test_translation_invariance_exact(self, small_ctx):
        u = np.tile([3e-6, -1e-6], (len(small_ctx.quad), 1))
        assert np.all(small_ctx.theta(u) == 0.0)
        assert np.all(small_ctx.force_density(u) == 0.0)

    def test_linearization_small_displacement(self, small_ctx, rng):
        u = rng.standard_normal((len(small_ctx.quad), 2)) * 1e-11
        F = small_ctx.force_density(u)
        Fl = small_ctx.force_density(u, linearized=True)
        np.testing.assert_allclose(F, Fl, rtol=1e-6, atol=1e-6 * np.abs(Fl).max())


@pytest.mark.skipif(BACKEND != "cython", reason="compiled kernels not built")
class TestBackendsAgree:
    def args(self, ctx):
        t = ctx.table
        return t.positions, t.weights, t.omega, t.pi, t.pj, t.intact

    def test_pairs_identical(self, small_ctx):
        pos = small_ctx.table.positions
        a = kernels.build_pairs(pos, EPS)
        b = _pykernels.build_pairs(pos, EPS)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_theta_force_energy(self, small_ctx, rng):
        pos, w, om, pi, pj, intact = self.args(small_ctx)
        m = small_ctx.material
        u = rng.standard_normal((len(pos), 2)) * 1e-6
        th_c = kernels.hydrostatic(pos, u, w, om, pi, pj, intact, EPS, 0)
        th_p = _pykernels.hydrostatic(pos, u, w, om, pi, pj, intact, EPS, 0)
        np.testing.assert_allclose(th_c, th_p, rtol=1e-12, atol=1e-15 * np.abs(th_p).max())
        f, g = m.pairwise, m.hydrostatic
        args = (EPS, 0, f.c, f.beta, 0, g.Cbar, 0.0, 0, f.d2f0, g.d2g0)
        Fc = kernels.force(pos, u, th_p, w, om, pi, pj, intact, *args)
        Fp = _pykernels.force(pos, u, th_p, w, om, pi, pj, intact, *args)
        np.testing.assert_allclose(Fc, Fp, rtol=1e-10, atol=1e-12 * np.abs(Fp).max())
        Ec = kernels.bond_energy(pos, u, w, om, pi, pj, intact, EPS, 0, f.c, f.beta)
        Ep = _pykernels.bond_energy(pos, u, w, om, pi, pj, intact, EPS, 0, f.c, f.beta)
        np.testing.assert_allclose(Ec, Ep, rtol=1e-10)
        Zc = kernels.damage(pos, u, pi, pj, intact, m.r_plus)
        Zp = _pykernels.damage(pos, u, pi, pj, intact, m.r_plus)
        np.testing.assert_allclose(Zc, Zp, rtol=1e-13)

    def test_thread_count_bitwise(self, small_ctx, rng):
        pos, w, om, pi, pj, intact = self.args(small_ctx)
        m = small_ctx.material
        u = rng.standard_normal((len(pos), 2)) * 1e-6
        th1 = kernels.hydrostatic(pos, u, w, om, pi, pj, intact, EPS, 0, 1)
        th4 = kernels.hydrostatic(pos, u, w, om, pi, pj, intact, EPS, 0, 4)
        assert np.array_equal(th1, th4)
        f, g = m.pairwise, m.hydrostatic
        args = (EPS, 0, f.c, f.beta, 0, g.Cbar, 0.0, 0, f.d2f0, g.d2g0)
        F1 = kernels.force(pos, u, th1, w, om, pi, pj, intact, *args, 1)
        F4 = kernels.force(pos, u, th1, w, om, pi, pj, intact, *args, 4)
        assert np.array_equal(F1, F4)


class TestEvaluatePoint:
    def test_uniform_extension_balanced_at_node(self, material):
        mesh = build_uniform_mesh(0.02, 0.02, 0.001)
        from pdfem.mesh import build_quad_points, triangle_rule
        q = build_quad_points(mesh, triangle_rule(2))
        alpha = 1e-5
        th, L, parts, _ = evaluate_point(np.array([0.01, 0.01]), lambda p: alpha * np.atleast_2d(p),
                                         q.positions, q.weights, material, contributions=True)
        assert th == pytest.approx(alpha * EPS / 6.0, rel=2e-3)
        one_sided = np.abs(parts[parts[:, 0] > 0, 0].sum())
        assert np.abs(L).max() < 1e-8 * one_sided
