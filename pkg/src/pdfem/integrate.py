"""Central-difference explicit dynamics with a lumped mass.

A *system* is anything with a ``mass`` array (lumped diagonal, same shape as
the displacement) and a ``force(U, t)`` method returning the assembled nodal
force. ``Problem`` wraps a ``NonlocalContext`` in that shape.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from pdfem.fem import assemble_force, lumped_nodal_mass

log = logging.getLogger(__name__)


class BlowUpError(RuntimeError):
    def __init__(self, step: int, reason: str):
        super().__init__(f"solution blew up at step {step}: {reason}")
        self.step = step


@dataclass(frozen=True)
class SimState:
    U: np.ndarray
    U_prev: np.ndarray
    V: np.ndarray
    t: float
    k: int


@dataclass(frozen=True)
class BCSpec:
    """Strongly imposed nodal conditions.

    ``fixed`` nodes have both displacement components held at zero. ``left``
    and ``right`` nodes have their x-velocity prescribed (and x-displacement
    pinned to velocity * t); their y-component is free.
    """

    fixed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    left: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    right: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    left_velocity: float = -1.0
    right_velocity: float = 1.0

    def __post_init__(self):
        sets = [set(np.asarray(a).tolist()) for a in (self.fixed, self.left, self.right)]
        if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
            raise ValueError("boundary-condition node sets overlap")

    def apply(self, U: np.ndarray, V: np.ndarray, t: float) -> None:
        U[self.fixed] = 0.0
        V[self.fixed] = 0.0
        U[self.left, 0] = self.left_velocity * t
        V[self.left, 0] = self.left_velocity
        U[self.right, 0] = self.right_velocity * t
        V[self.right, 0] = self.right_velocity


def crack_experiment_bc(mesh, collar: float, strip: float, split_x: float,
                        left_velocity: float = -1.0, right_velocity: float = 1.0) -> BCSpec:
    """Top collar ``y >= height - collar`` fixed; bottom strips ``y <= strip`` pulled apart.

    Strip nodes exactly on ``x = split_x`` (the crack line) belong to neither side.
    """
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    tol = 1e-9 * mesh.h
    fixed = np.nonzero(y >= mesh.height - collar - tol)[0]
    bottom = y <= strip + tol
    left = np.nonzero(bottom & (x < split_x - tol))[0]
    right = np.nonzero(bottom & (x > split_x + tol))[0]
    return BCSpec(fixed, left, right, left_velocity, right_velocity)


@dataclass(frozen=True)
class TimeLoopConfig:
    dt: float
    t_end: float
    cadence: int = 1
    linearized: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        if self.t_end < self.dt * (1 - 1e-12):
            raise ValueError("final time must be at least one time step")
        if self.cadence < 1:
            raise ValueError("output cadence must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class Problem:
    """Nonlocal FE system: lumped mass plus peridynamic and body forces."""

    def __init__(self, ctx, body_force=None, linearized: bool = False):
        self.ctx = ctx
        self.body_force = body_force
        self.linearized = linearized
        self.mass = lumped_nodal_mass(ctx.mesh, ctx.material.density)
        self.size = max(ctx.mesh.width, ctx.mesh.height)

    def force(self, U, t):
        return assemble_force(self.ctx, U, t, self.body_force, self.linearized)


def initial_state(U0, V0, bc: BCSpec | None = None) -> SimState:
    U = np.array(U0, dtype=float)
    V = np.array(V0, dtype=float)
    if bc is not None:
        bc.apply(U, V, 0.0)
    return SimState(U, U.copy(), V, 0.0, 0)


def _check(U, step, size):
    if not np.all(np.isfinite(U)):
        raise BlowUpError(step, "non-finite displacement")
    if size is not None and np.max(np.abs(U)) > 1e3 * size:
        raise BlowUpError(step, f"displacement exceeds {1e3 * size:g} m")


def startup_step(state: SimState, system, dt: float, bc: BCSpec | None = None) -> SimState:
    """First step: U1 = U0 + dt V0 + dt^2/2 M^-1 F(U0, 0)."""
    F = system.force(state.U, state.t)
    U1 = state.U + dt * state.V + 0.5 * dt * dt * F / system.mass
    V1 = (U1 - state.U) / dt
    t1 = (state.k + 1) * dt
    if bc is not None:
        bc.apply(U1, V1, t1)
    _check(U1, state.k + 1, getattr(system, "size", None))
    return SimState(U1, state.U, V1, t1, state.k + 1)


def step(state: SimState, system, dt: float, bc: BCSpec | None = None) -> SimState:
    """U_{k+1} = dt^2 M^-1 F^k + 2 U_k - U_{k-1}; V_{k+1} = (U_{k+1} - U_k) / dt."""
    F = system.force(state.U, state.t)
    U1 = dt * dt * F / system.mass + 2.0 * state.U - state.U_prev
    V1 = (U1 - state.U) / dt
    t1 = (state.k + 1) * dt
    if bc is not None:
        bc.apply(U1, V1, t1)
    _check(U1, state.k + 1, getattr(system, "size", None))
    return SimState(U1, state.U, V1, t1, state.k + 1)


def run(system, state0: SimState, loop: TimeLoopConfig, bc: BCSpec | None = None,
        on_output: Callable[[SimState], object] | None = None):
    """Startup step then ``n_steps - 1`` regular steps.

    ``on_output`` is called with the state at step 0 and every ``cadence``
    steps (plus the final step); its return values are collected.

    Returns:
        (final state, list of on_output results)
    """
    outputs = []
    emit = on_output or (lambda s: s)
    state = state0
    outputs.append(emit(state))
    n = loop.n_steps
    for k in range(n):
        state = startup_step(state, system, loop.dt, bc) if state.k == 0 else step(state, system, loop.dt, bc)
        if state.k % loop.cadence == 0 or state.k == n:
            outputs.append(emit(state))
            log.debug("step %d t=%.6g", state.k, state.t)
    return state, outputs
