"""Experiment drivers: build a discretization from a config, run it, study convergence."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pdfem import diagnostics, io
from pdfem.config import Config, ConfigError, emit_config
from pdfem.fem import l2_project, lumped_nodal_mass, scalar_mass
from pdfem.integrate import BCSpec, Problem, TimeLoopConfig, crack_experiment_bc, initial_state, run
from pdfem.kernel import NonlocalContext
from pdfem.material import (HydrostaticPotential, InfluenceFunction, MaterialModel, PairwisePotential, calibrate,
                            critical_bond_strain, shape_moment_MJ)
from pdfem.mesh import CrackSegment, build_uniform_mesh, interpolate
from pdfem.stability import CflReport, estimate_cfl

log = logging.getLogger(__name__)


def calibration(cfg: Config) -> dict:
    m = cfg.material
    J = InfluenceFunction(m.influence)
    c, beta, Cbar = calibrate(m.bulk_modulus, m.poisson_ratio, m.fracture_toughness, J)
    f = PairwisePotential(c, beta)
    rp = f.r_plus if m.inflection == "analytic" else f.r_bar_printed
    sc, _ = critical_bond_strain(f, m.horizon, rp)
    return {"c": c, "beta": beta, "Cbar": Cbar, "M_J": shape_moment_MJ(J), "Sc_plus_at_horizon": sc,
            "r_plus": rp}


def build_material(cfg: Config) -> MaterialModel:
    m = cfg.material
    J = InfluenceFunction(m.influence)
    c, beta, Cbar = calibrate(m.bulk_modulus, m.poisson_ratio, m.fracture_toughness, J)
    if m.hydrostatic == "quadratic":
        g = HydrostaticPotential("quadratic", Cbar)
    else:
        # curvature |Cbar| at the origin, decay scale matched to the bond potential
        g = HydrostaticPotential("convex_concave", Cbar, c_g=abs(Cbar) / (2.0 * beta), beta_g=beta)
    return MaterialModel(m.density, m.horizon, J, PairwisePotential(c, beta), g, inflection=m.inflection)


def build_mesh(cfg: Config, h: float | None = None):
    d = cfg.domain
    crack = None if d.crack is None else CrackSegment(tuple(d.crack[:2]), tuple(d.crack[2:]))
    return build_uniform_mesh(d.width, d.height, cfg.discretization.h if h is None else h, crack)


def build_context(cfg: Config, workers: int = 1, h: float | None = None) -> NonlocalContext:
    return NonlocalContext(build_mesh(cfg, h), build_material(cfg), boundary=cfg.material.boundary_function,
                           quad_order=cfg.discretization.quadrature_order, workers=workers)


def build_bc(cfg: Config, mesh) -> BCSpec | None:
    b = cfg.bc
    if b.mode == "free":
        return None
    eps = cfg.material.horizon
    return crack_experiment_bc(mesh, b.collar or eps, b.strip or eps, cfg.domain.crack[0], b.left_velocity,
                               b.right_velocity)


def initial_fields(cfg: Config, mesh) -> tuple[np.ndarray, np.ndarray]:
    """Projections of the configured initial displacement and velocity."""
    ini = cfg.initial
    W, H = cfg.domain.width, cfg.domain.height
    if ini.displacement == "sine" and ini.amplitude != 0.0:
        def u0(p):
            s = ini.amplitude * np.sin(np.pi * p[:, 0] / W) * np.sin(np.pi * p[:, 1] / H)
            return np.stack([s, s], axis=1)

        U0 = l2_project(mesh, u0)
    else:
        U0 = np.zeros((mesh.num_nodes, 2))
    V0 = np.tile([ini.velocity_x, ini.velocity_y], (mesh.num_nodes, 1)).astype(float)
    return U0, V0


def cfl_report(ctx: NonlocalContext, mass, iterations: int, check_min: bool = False, seed: int = 0) -> CflReport:
    return estimate_cfl(ctx.apply_linearized_operator, mass, max_iter=iterations, seed=seed,
                        apply_K_abs=lambda U: ctx.apply_linearized_operator(U, absolute=True),
                        check_min=check_min)


def resolve_time_step(cfg: Config, report: CflReport) -> float:
    disc = cfg.discretization
    T = disc.final_time
    if disc.time_step is None:
        if not math.isfinite(report.dt_max):
            raise ConfigError("operator has no stiffness; set an explicit time step", "discretization.time_step")
        raw = disc.cfl_safety * report.dt_max
        return T / math.ceil(T / raw * (1 - 1e-12))
    dt = disc.time_step
    if dt > report.dt_max and not disc.allow_unstable:
        raise ConfigError(f"time step {dt:g} s exceeds the CFL bound {report.dt_max:g} s "
                          "(set allow_unstable = true to override)", "discretization.time_step")
    return dt


@dataclass
class RunResult:
    dt: float
    cfl: CflReport
    energies: list = field(default_factory=list)  # (step, t, EnergyReport)
    samples: dict = field(default_factory=dict)  # comparison time -> U
    final_U: np.ndarray | None = None
    final_V: np.ndarray | None = None
    mesh: object = None
    ctx: object = None


def _sample_steps(times, dt: float, n: int) -> dict:
    out = {}
    for t in times:
        k = t / dt
        if abs(k - round(k)) > 1e-6 or round(k) > n:
            raise ConfigError(f"comparison time {t:g} s is not a step of size {dt:g} s within the run",
                              "study.comparison_times")
        out[int(round(k))] = t
    return out


def run_simulation(cfg: Config, workers: int = 1, output_dir=None, linearized: bool = False,
                   dt: float | None = None, h: float | None = None, sample_times=(), cfl: CflReport | None = None,
                   write_vtk: bool | None = None, ctx: NonlocalContext | None = None,
                   keep_context: bool = False) -> RunResult:
    """Mesh, material, tables, CFL check, time loop and diagnostics.

    Args:
        cfg: validated configuration.
        workers: kernel thread count (results do not depend on it).
        output_dir: where the energy CSV, VTK snapshots and run log go; None
            disables file output.
        dt: shared time step overriding the config (convergence studies).
        h: mesh size overriding the config.
        sample_times: times at which to keep a copy of the displacement.
        ctx: prebuilt discretization to reuse (must match ``cfg`` and ``h``).
    """
    cfg = cfg.with_derived()
    if ctx is None:
        ctx = build_context(cfg, workers, h)
    mesh = ctx.mesh
    problem = Problem(ctx, linearized=linearized)
    if cfl is None:
        cfl = cfl_report(ctx, problem.mass, cfg.discretization.cfl_iterations)
    if dt is None:
        dt = resolve_time_step(cfg, cfl)
    loop = TimeLoopConfig(dt, cfg.discretization.final_time, cfg.output.cadence, linearized)
    n = loop.n_steps
    wanted = _sample_steps(sample_times, dt, n)
    bc = build_bc(cfg, mesh)
    U0, V0 = initial_fields(cfg, mesh)
    state0 = initial_state(U0, V0, bc)
    formats = set(cfg.output.formats)
    if write_vtk is None:
        write_vtk = "vtk" in formats
    out = None
    elog = None
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        derived = calibration(cfg)
        derived.update({"dt_max": cfl.dt_max, "cfl_branch": cfl.branch, "dt": dt, "steps": n,
                        "num_nodes": mesh.num_nodes, "num_quad_points": len(ctx.quad),
                        "num_bonds": ctx.table.num_pairs, "backend": _backend_name()})
        with open(out / "run.log", "w") as fh:
            fh.write("# canonical configuration\n")
            fh.write(emit_config(cfg))
            fh.write("\n# derived quantities\n")
            for k, v in derived.items():
                fh.write(f"# {k} = {v!r}\n")
        if "csv" in formats:
            elog = io.EnergyLog(out / "energy.csv")
    result = RunResult(dt, cfl, mesh=mesh, ctx=ctx if keep_context else None)
    Gc = cfg.material.fracture_toughness

    def on_step(state):
        if state.k in wanted:
            result.samples[wanted[state.k]] = state.U.copy()
        if state.k % loop.cadence and state.k != n:
            return None
        rep = diagnostics.total_energy(state.U, state.V, ctx, problem.mass, Gc=Gc)
        result.energies.append((state.k, state.t, rep))
        if elog is not None:
            elog.write(state.k, state.t, rep)
        if out is not None and write_vtk:
            Z = diagnostics.damage_field(state.U, ctx)
            fields = io.snapshot_fields(state.U, state.V, Z, diagnostics.nodal_strain(state.U, mesh))
            io.write_vtk(out / f"fields_{state.k:08d}.vtk", mesh, fields)
        return None

    try:
        final, _ = run(problem, state0, TimeLoopConfig(dt, loop.t_end, 1, linearized), bc, on_step)
    finally:
        if elog is not None:
            elog.close()
    result.final_U, result.final_V = final.U, final.V
    return result


def _backend_name() -> str:
    from pdfem._backend import BACKEND

    return BACKEND


def check_study(sizes) -> float:
    """Validate nested mesh sizes and return the common ratio r."""
    if len(sizes) < 3:
        raise ConfigError("need at least three mesh sizes", "study.mesh_sizes")
    ratios = [sizes[i] / sizes[i + 1] for i in range(len(sizes) - 1)]
    if any(r <= 1.0 for r in ratios):
        raise ConfigError("mesh sizes must be distinct and decreasing", "study.mesh_sizes")
    if any(abs(r - ratios[0]) > 1e-12 * ratios[0] for r in ratios):
        raise ConfigError("mesh sizes do not form a constant ratio", "study.mesh_sizes")
    return ratios[0]


@dataclass
class StudyResult:
    rows: list  # (time, alpha, h1, h2, h3, e12, e23)
    dt: float
    runs: list


def convergence_study(cfg: Config, workers: int = 1, output_dir=None) -> StudyResult:
    """Run every mesh of the study with a shared time step and compute alpha(t)."""
    cfg = cfg.with_derived()
    sizes = list(cfg.study.mesh_sizes)
    r = check_study(sizes)
    times = list(cfg.study.comparison_times) or [cfg.discretization.final_time]
    # shared time step from the finest mesh (largest lambda_max)
    fine_ctx = build_context(cfg, workers, sizes[-1])
    fine_mass = lumped_nodal_mass(fine_ctx.mesh, fine_ctx.material.density)
    fine_cfl = cfl_report(fine_ctx, fine_mass, cfg.discretization.cfl_iterations)
    dt = resolve_time_step(cfg, fine_cfl)
    runs = [None] * len(sizes)
    for i in [len(sizes) - 1] + list(range(len(sizes) - 1)):
        h = sizes[i]
        sub = None if output_dir is None else Path(output_dir) / f"h_{h:.6g}"
        fine = i == len(sizes) - 1
        runs[i] = run_simulation(cfg, workers, sub, dt=dt, h=h, sample_times=times, write_vtk=False,
                                 cfl=fine_cfl if fine else None, ctx=fine_ctx if fine else None)
        fine_ctx = None
        log.info("mesh h=%g done (%d nodes)", h, runs[i].mesh.num_nodes)
    fine = runs[-1].mesh
    Ms = scalar_mass(fine)
    rows = []
    for t in times:
        fields = [interpolate(res.mesh, res.samples[t], fine.nodes) for res in runs]
        for i in range(len(sizes) - 2):
            u1, u2, u3 = fields[i:i + 3]
            e12 = _norm(u1 - u2, Ms)
            e23 = _norm(u2 - u3, Ms)
            alpha = diagnostics.convergence_rate(u1, u2, u3, r, mass=Ms)
            rows.append((t, alpha, sizes[i], sizes[i + 1], sizes[i + 2], e12, e23))
    if output_dir is not None:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(output_dir) / "convergence.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "alpha", "h1", "h2", "h3", "e12", "e23"])
            for row in rows:
                w.writerow([repr(float(x)) for x in row])
    return StudyResult(rows, dt, runs)


def _norm(v, Ms) -> float:
    return math.sqrt(max(float(np.sum(v * (Ms @ v))), 0.0))
