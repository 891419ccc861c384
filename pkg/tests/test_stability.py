import logging
import math

import numpy as np
import pytest

from pdfem.fem import lumped_nodal_mass
from pdfem.integrate import Problem, initial_state, startup_step, step
from pdfem.kernel import NonlocalContext
from pdfem.material import plexiglass
from pdfem.mesh import build_uniform_mesh
from pdfem.stability import CflReport, dense_operator, discrete_energy, estimate_cfl, power_iteration

log = logging.getLogger(__name__)


def context(size, h, eps=0.004):
    return NonlocalContext(build_uniform_mesh(size, size, h), plexiglass(eps))


@pytest.fixture(scope="module")
def nine():
    ctx = context(0.004, 0.002)
    return ctx, lumped_nodal_mass(ctx.mesh, ctx.material.density)


@pytest.fixture(scope="module")
def twentyfive():
    ctx = context(0.008, 0.002)
    return ctx, lumped_nodal_mass(ctx.mesh, ctx.material.density)


class TestPowerIteration:
    def test_diagonal(self):
        d = np.array([1.0, 5.0, 3.0])
        lam, x, _, res = power_iteration(lambda v: d * v, 3, tol=1e-12)
        assert lam == pytest.approx(5.0, rel=1e-10)
        assert abs(x[1]) == pytest.approx(1.0, rel=1e-5)

    def test_zero_operator_unbounded(self):
        rep = estimate_cfl(lambda U: np.zeros_like(U), np.ones((4, 2)))
        assert rep.dt_max == math.inf
        assert rep.to_json()["dt_max"] == "infinite"

    def test_scaling_by_four_halves_dt(self, nine):
        ctx, m = nine
        a = estimate_cfl(ctx.apply_linearized_operator, m)
        b = estimate_cfl(lambda U: 4.0 * ctx.apply_linearized_operator(U), m)
        assert b.dt_max == pytest.approx(a.dt_max / 2, rel=1e-6)


class TestCfl:
    def test_nine_nodes_against_dense_eig(self, nine):
        ctx, m = nine
        assert ctx.mesh.num_nodes == 9
        K = dense_operator(ctx.apply_linearized_operator, m.shape)
        assert np.abs(K - K.T).max() < 1e-10 * np.abs(K).max()
        s = 1.0 / np.sqrt(m.ravel())
        eig = np.linalg.eigvalsh(s[:, None] * K * s[None, :])
        rep = estimate_cfl(ctx.apply_linearized_operator, m)
        assert rep.lambda_max == pytest.approx(eig[-1], rel=1e-6)
        assert rep.dt_max == pytest.approx(2 / math.sqrt(eig[-1]), rel=1e-6)
        assert rep.psd == (eig[0] >= -1e-8 * eig[-1])

    def test_absolute_branch_when_indefinite(self):
        d = np.array([-2.0, 1.0])
        rep = estimate_cfl(lambda U: d * U, np.ones(2), apply_K_abs=lambda U: np.abs(d) * U)
        assert not rep.psd and rep.branch == "absolute"
        assert rep.lambda_max == pytest.approx(2.0, rel=1e-8)

    def test_refinement_does_not_lower_lambda(self):
        lams = []
        for h in (0.002, 0.001):
            ctx = context(0.02, h)
            rep = estimate_cfl(ctx.apply_linearized_operator, lumped_nodal_mass(ctx.mesh, 1200.0), check_min=False)
            lams.append(rep.lambda_max)
        assert lams[1] >= 0.99 * lams[0]

    def test_report_json(self):
        rep = CflReport(4.0, 1.0, 3, 1e-9, "assembled", True)
        assert rep.to_json()["lambda_max"] == 4.0


def linear_trajectory(ctx, m, dt, n, rng):
    prob = Problem(ctx, linearized=True)
    U0 = rng.standard_normal(m.shape) * 1e-6
    V0 = rng.standard_normal(m.shape) * 1e-2
    s = startup_step(initial_state(U0, V0), prob, dt)
    states = [s.U_prev, s.U]
    for _ in range(n - 1):
        s = step(s, prob, dt)
        states.append(s.U)
    return states


class TestDiscreteEnergy:
    def test_zero(self, nine):
        ctx, m = nine
        z = np.zeros(m.shape)
        assert discrete_energy(z, z, 1e-8, ctx.apply_linearized_operator, m) == 0.0

    def test_static(self, nine, rng):
        ctx, m = nine
        u = rng.standard_normal(m.shape) * 1e-6
        expect = 0.5 * np.sum(u * ctx.apply_linearized_operator(u))
        assert discrete_energy(u, u, 1e-8, ctx.apply_linearized_operator, m) == pytest.approx(expect, rel=1e-12)

    def test_conserved_25_nodes(self, twentyfive, rng):
        ctx, m = twentyfive
        assert ctx.mesh.num_nodes == 25
        dt = 0.9 * estimate_cfl(ctx.apply_linearized_operator, m).dt_max
        U = linear_trajectory(ctx, m, dt, 100, rng)
        E = np.array([discrete_energy(a, b, dt, ctx.apply_linearized_operator, m) for a, b in zip(U, U[1:])])
        assert E[0] > 0
        assert np.abs(E - E[0]).max() / E[0] < 1e-10

    def test_instability_smoke(self, twentyfive, rng):
        """Above the bound the energy grows; logged only."""
        ctx, m = twentyfive
        rep = estimate_cfl(ctx.apply_linearized_operator, m)
        prob = Problem(ctx, linearized=True)
        prob.size = None
        U0 = rng.standard_normal(m.shape) * 1e-9
        s = startup_step(initial_state(U0, np.zeros_like(U0)), prob, 1.05 * rep.dt_max)
        e0 = np.sum(s.U * s.U)
        for _ in range(5000):
            s = step(s, prob, 1.05 * rep.dt_max)
            if not np.all(np.isfinite(s.U)) or np.sum(s.U * s.U) > 1e200:
                break
        growth = np.sum(s.U * s.U) / e0
        log.info("displacement energy growth at 1.05 dt_max: %.3g (k=%d)", growth, s.k)
        print(f"instability smoke: growth {growth:.3g} after {s.k} steps")
