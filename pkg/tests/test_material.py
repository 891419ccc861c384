import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdfem.material import (HydrostaticPotential, InfluenceFunction, MaterialError, MaterialModel,
                            PairwisePotential, calibrate, critical_bond_strain, lame_from_bulk,
                            lipschitz_constant, moment, plexiglass, shape_moment_MJ, unit_ball_volume)

LINEAR = InfluenceFunction("one_minus_r")
CONST = InfluenceFunction("const")


class TestInfluence:
    def test_values(self):
        np.testing.assert_allclose(LINEAR(np.array([0.0, 0.25, 1.0, 1.5])), [1.0, 0.75, 0.0, 0.0])
        assert CONST(0.3) == 1.0
        assert CONST(1.0) == 0.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            InfluenceFunction("gauss")


class TestMoments:
    # closed forms: d * int_0^1 J(r) r^(d-1-alpha) dr with d = 2
    @pytest.mark.parametrize("alpha,expected", [(0.0, 1.0 / 3.0), (1.0, 1.0), (-1.0, 1.0 / 6.0)])
    def test_linear_influence(self, alpha, expected):
        assert moment(LINEAR, alpha) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("alpha,expected", [(0.0, 1.0), (1.0, 2.0), (-1.0, 2.0 / 3.0)])
    def test_constant_influence(self, alpha, expected):
        assert moment(CONST, alpha) == pytest.approx(expected, rel=1e-12)

    def test_divergent_moment(self):
        with pytest.raises(MaterialError):
            moment(LINEAR, 2.0)

    def test_shape_moment(self):
        assert abs(shape_moment_MJ(LINEAR) - 1.0 / 12.0) < 1e-12
        assert abs(shape_moment_MJ(CONST) - 1.0 / 3.0) < 1e-12

    def test_unit_ball(self):
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)


class TestCalibration:
    def test_plexiglass(self):
        c, beta, Cbar = calibrate(25e9, 0.245, 500.0, LINEAR)
        assert c == pytest.approx(4712.4, rel=5e-4)
        assert beta == pytest.approx(1.5647e8, rel=5e-4)
        assert Cbar == pytest.approx(-1.7349e11, rel=5e-4)

    def test_lame_relations(self):
        lam, mu = lame_from_bulk(25e9, 0.245)
        # K = lambda + 2 mu / 3 and nu = lambda / (2 (lambda + mu)) in 3-d
        assert lam + 2.0 * mu / 3.0 == pytest.approx(25e9, rel=1e-12)
        assert lam / (2.0 * (lam + mu)) == pytest.approx(0.245, rel=1e-12)

    def test_constant_influence_branch(self):
        c, beta, Cbar = calibrate(25e9, 0.245, 500.0, CONST)
        lam, mu = lame_from_bulk(25e9, 0.245)
        MJ = 1.0 / 3.0
        assert c == pytest.approx(math.pi * 500.0 / (4 * MJ), rel=1e-12)
        assert beta == pytest.approx(4 * mu / (c * MJ), rel=1e-12)
        assert Cbar == pytest.approx(2 * (lam - mu) / MJ**2, rel=1e-12)

    @pytest.mark.parametrize("nu", [0.5, 0.6, -1.0])
    def test_invalid_poisson(self, nu):
        with pytest.raises(MaterialError):
            calibrate(25e9, nu, 500.0, LINEAR)

    def test_invalid_moduli(self):
        with pytest.raises(MaterialError):
            calibrate(-1.0, 0.2, 500.0, LINEAR)
        with pytest.raises(MaterialError):
            calibrate(1e9, 0.2, 0.0, LINEAR)


class TestPairwisePotential:
    def setup_method(self):
        self.f = PairwisePotential(4712.4, 1.5647e8)

    def test_inflection_analytic(self):
        # f'' vanishes where 2 beta r^2 = 1
        assert self.f.r_plus == pytest.approx(1.0 / math.sqrt(2 * self.f.beta), rel=1e-12)
        assert self.f.r_minus == pytest.approx(-self.f.r_plus, rel=1e-12)
        assert abs(self.f.d2f(self.f.r_plus)) < 1e-9 * self.f.d2f0

    def test_printed_inflection_differs(self):
        assert self.f.r_bar_printed / self.f.r_plus == pytest.approx(math.sqrt(2.0))

    def test_softening_beyond_inflection(self):
        assert self.f.d2f(1.1 * self.f.r_plus) < 0 < self.f.d2f(0.9 * self.f.r_plus)

    @given(st.floats(-3e-4, 3e-4))
    def test_derivatives_by_finite_difference(self, r):
        h = 1e-8
        fd = (self.f.f(r + h) - self.f.f(r - h)) / (2 * h)
        assert fd == pytest.approx(self.f.df(r), rel=1e-5, abs=1e-3)
        fd2 = (self.f.df(r + h) - self.f.df(r - h)) / (2 * h)
        assert fd2 == pytest.approx(self.f.d2f(r), rel=1e-5, abs=1e2)

    def test_bounded_and_even(self):
        r = np.linspace(-1e-3, 1e-3, 101)
        assert np.all(self.f.f(r) <= self.f.c)
        np.testing.assert_allclose(self.f.f(r), self.f.f(-r))

    def test_invalid(self):
        with pytest.raises(MaterialError):
            PairwisePotential(-1.0, 1.0)


class TestHydrostatic:
    def test_quadratic(self):
        g = HydrostaticPotential("quadratic", -2.0)
        assert g.g(3.0) == pytest.approx(-9.0)
        assert g.dg(3.0) == pytest.approx(-6.0)
        assert g.d2g0 == -2.0
        with pytest.raises(MaterialError):
            g.inflections()

    def test_convex_concave_inflections(self):
        g = HydrostaticPotential("convex_concave", c_g=2.0, beta_g=50.0)
        tp, tm = g.inflections()
        assert tp == pytest.approx(1.0 / math.sqrt(100.0), rel=1e-12)
        assert tm == pytest.approx(-tp, rel=1e-12)

    def test_invalid(self):
        with pytest.raises(MaterialError):
            HydrostaticPotential("cubic")
        with pytest.raises(MaterialError):
            HydrostaticPotential("convex_concave", c_g=0.0, beta_g=1.0)


class TestCriticalStrain:
    def test_scaling(self):
        f = PairwisePotential(4712.4, 1.5647e8)
        sp, sm = critical_bond_strain(f, 0.004)
        assert sp == pytest.approx(f.r_plus / math.sqrt(0.004))
        assert sm == pytest.approx(-sp)
        sp4, _ = critical_bond_strain(f, 0.016)
        assert sp4 == pytest.approx(sp / 2.0)

    def test_bad_length(self):
        with pytest.raises(MaterialError):
            critical_bond_strain(PairwisePotential(1.0, 1.0), 0.0)


class TestLipschitzConstant:
    def test_closed_form_for_plexiglass(self):
        m = plexiglass(0.004)
        f, g = m.pairwise, m.hydrostatic
        # sup |f''| is attained at r = 0 for the exponential potential
        expected = 4.0 * (2 * f.c * f.beta * 1.0 + abs(g.Cbar) * (1.0 / 3.0) ** 2) / 0.004**2
        assert lipschitz_constant(f, g, LINEAR, 0.004) == pytest.approx(expected, rel=1e-9)


class TestMaterialModel:
    def test_inflection_modes(self):
        m = plexiglass(0.004, inflection="printed")
        assert m.r_plus == pytest.approx(1.0 / math.sqrt(m.pairwise.beta))
        assert plexiglass(0.004).r_plus == pytest.approx(m.pairwise.r_plus)

    def test_validation(self):
        base = plexiglass(0.004)
        with pytest.raises(MaterialError):
            MaterialModel(0.0, 0.004, LINEAR, base.pairwise, base.hydrostatic)
        with pytest.raises(MaterialError):
            MaterialModel(1.0, -1.0, LINEAR, base.pairwise, base.hydrostatic)
        with pytest.raises(MaterialError):
            MaterialModel(1.0, 0.004, LINEAR, base.pairwise, base.hydrostatic, inflection="other")
