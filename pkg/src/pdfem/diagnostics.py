"""Damage, crack-zone and Griffith energies, crack length and convergence rate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from pdfem._backend import kernels
from pdfem.mesh import CrackSegment, Mesh, shape_gradients


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    potential: float
    total: float
    crack_length: float
    pe_crack: float
    ge: float

    def row(self) -> tuple[float, ...]:
        return (self.kinetic, self.potential, self.total, self.crack_length, self.pe_crack, self.ge)


def damage_field(U, ctx) -> np.ndarray:
    """Z at every node from node-to-node bonds: max of S / S_c^+, severed bonds skipped."""
    t = ctx.node_table
    u = np.ascontiguousarray(np.asarray(U, dtype=float).reshape(-1, 2))
    return kernels.damage(t.positions, u, t.pi, t.pj, t.intact, ctx.material.r_plus)


def crack_zone_energy(U, Z, ctx, threshold: float = 1.0, parts: bool = False):
    """Potential energy restricted to quadrature points whose interpolated Z >= threshold.

    With ``parts=True`` returns (bond part, hydrostatic part).
    """
    z_qp = ctx.interp @ np.asarray(Z, dtype=float)
    mask = z_qp >= threshold
    if not np.any(mask):
        return (0.0, 0.0) if parts else 0.0
    u_qp = ctx.at_quad(U)
    w = ctx.quad.weights
    bond = float(np.sum((w * ctx.bond_energy_density(u_qp))[mask]))
    hyd = float(np.sum((w * ctx.hydrostatic_energy_density(ctx.theta(u_qp)))[mask]))
    return (bond, hyd) if parts else bond + hyd


def griffith_energy(Gc: float, length: float) -> float:
    if length < 0:
        raise ValueError("crack length must be nonnegative")
    return Gc * length


def _edge_graph(mesh: Mesh, keep: np.ndarray):
    e = mesh.edges()
    e = e[keep[e[:, 0]] & keep[e[:, 1]]]
    n = mesh.num_nodes
    return sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))


def crack_length(Z, mesh: Mesh, crack: CrackSegment, seed_radius: float, threshold: float = 1.0) -> float:
    """Initial length plus the advance of the damaged region attached to the tip.

    Damaged nodes (Z >= threshold) are grouped into components through mesh
    edges; components with a node within ``seed_radius`` of the tip count.
    The advance is the largest projection of those nodes on the crack
    direction, measured from the tip.
    """
    damaged = np.asarray(Z) >= threshold
    if not np.any(damaged):
        return crack.length
    ncomp, labels = connected_components(_edge_graph(mesh, damaged), directed=False)
    tip = np.asarray(crack.p1)
    near = damaged & (np.hypot(*(mesh.nodes - tip).T) <= seed_radius)
    if not np.any(near):
        return crack.length
    comps = np.unique(labels[near])
    region = damaged & np.isin(labels, comps)
    advance = float(np.max((mesh.nodes[region] - tip) @ crack.direction))
    return crack.length + max(advance, 0.0)


def kinetic_energy(V, mass) -> float:
    return 0.5 * float(np.sum(np.asarray(mass) * np.asarray(V) ** 2))


def potential_energy(U, ctx) -> float:
    """Quadrature of the bond and hydrostatic energy densities."""
    u_qp = ctx.at_quad(U)
    dens = ctx.bond_energy_density(u_qp) + ctx.hydrostatic_energy_density(ctx.theta(u_qp))
    return float(np.sum(ctx.quad.weights * dens))


def total_energy(U, V, ctx, mass, Gc: float | None = None, seed_radius: float | None = None) -> EnergyReport:
    """Energies of a state; crack quantities are zero when the mesh has no crack."""
    kin = kinetic_energy(V, mass)
    pot = potential_energy(U, ctx)
    length = pe = ge = 0.0
    crack = ctx.mesh.crack
    if crack is not None:
        Z = damage_field(U, ctx)
        radius = ctx.material.horizon if seed_radius is None else seed_radius
        length = crack_length(Z, ctx.mesh, crack, radius)
        pe = crack_zone_energy(U, Z, ctx)
        ge = griffith_energy(Gc, length) if Gc is not None else 0.0
    return EnergyReport(kin, pot, kin + pot, length, pe, ge)


def convergence_rate(u1, u2, u3, r: float, mass=None) -> float:
    """log(|u1 - u2| / |u2 - u3|) / log(r) for fields on a common grid.

    Args:
        u1, u2, u3: coarse to fine solutions sampled on the same nodes.
        r: mesh ratio h1/h2 = h2/h3 (> 1).
        mass: optional scalar mass matrix defining the L2 norm; Euclidean otherwise.
    """
    if not r > 1:
        raise ValueError("mesh ratio must exceed 1")

    def norm(v):
        v = np.asarray(v, dtype=float)
        if mass is None:
            return float(np.linalg.norm(v))
        v = v.reshape(mass.shape[0], -1)
        return math.sqrt(max(float(np.sum(v * (mass @ v))), 0.0))

    e12 = norm(np.subtract(u1, u2))
    e23 = norm(np.subtract(u2, u3))
    if e12 == 0.0 or e23 == 0.0:
        raise ValueError("difference norm is zero; solutions are identical")
    return (math.log(e12) - math.log(e23)) / math.log(r)


def nodal_strain(U, mesh: Mesh) -> np.ndarray:
    """Area-weighted nodal average of the symmetric gradient, columns (xx, yy, xy)."""
    U = np.asarray(U, dtype=float).reshape(-1, 2)
    G = shape_gradients(mesh)  # (E, 3, 2)
    ue = U[mesh.elements]  # (E, 3, 2)
    grad = np.einsum("eai,eaj->eij", ue, G)  # du_i/dx_j
    eps = np.stack([grad[:, 0, 0], grad[:, 1, 1], 0.5 * (grad[:, 0, 1] + grad[:, 1, 0])], axis=1)
    area = mesh.element_areas()
    acc = np.zeros((mesh.num_nodes, 3))
    wsum = np.zeros(mesh.num_nodes)
    for a in range(3):
        np.add.at(acc, mesh.elements[:, a], area[:, None] * eps)
        np.add.at(wsum, mesh.elements[:, a], area)
    return acc / wsum[:, None]
