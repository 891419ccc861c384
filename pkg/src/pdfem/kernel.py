"""Horizon neighborhoods and nonlocal mechanics on quadrature-point clouds.

The horizon integral at a quadrature point is evaluated with the global
quadrature points as integration nodes. Bonds are stored once per unordered
pair; see ``NeighborTable``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pdfem._backend import kernels
from pdfem.material import MaterialModel
from pdfem.mesh import CrackSegment, Mesh, build_quad_points, interpolation_matrix, triangle_rule


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def smootherstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


BOUNDARY_MODES = ("smoothstep", "product", "none")


def boundary_function(x, width: float, height: float, horizon: float, mode: str = "smoothstep"):
    """Cutoff that is 0 on the rectangle boundary and 1 at distance >= horizon.

    ``smoothstep``: cubic step of the distance to the boundary (its gradient
    kinks along the corner diagonals). ``product``: product of quintic steps
    of the distance to each side, twice continuously differentiable.
    ``none``: identically 1.
    """
    pts = np.asarray(x, dtype=float)
    if mode == "none":
        return np.ones(pts.shape[:-1]) if pts.ndim > 1 else 1.0
    px, py = pts[..., 0], pts[..., 1]
    if mode == "smoothstep":
        dist = np.minimum(np.minimum(px, width - px), np.minimum(py, height - py))
        val = smoothstep(np.maximum(dist, 0.0) / horizon)
    elif mode == "product":
        val = (smootherstep(px / horizon) * smootherstep((width - px) / horizon)
               * smootherstep(py / horizon) * smootherstep((height - py) / horizon))
    else:
        raise ValueError(f"unknown boundary function mode {mode!r}")
    return val if np.ndim(val) else float(val)


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def crosses_crack(a, b, crack: CrackSegment) -> np.ndarray:
    """True where segment [a, b] properly crosses the crack; touching does not count."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    (p0x, p0y), (p1x, p1y) = crack.p0, crack.p1
    o1 = _orient(p0x, p0y, p1x, p1y, a[:, 0], a[:, 1])
    o2 = _orient(p0x, p0y, p1x, p1y, b[:, 0], b[:, 1])
    o3 = _orient(a[:, 0], a[:, 1], b[:, 0], b[:, 1], p0x, p0y)
    o4 = _orient(a[:, 0], a[:, 1], b[:, 0], b[:, 1], p1x, p1y)
    return (o1 * o2 < 0.0) & (o3 * o4 < 0.0)


def sever_mask(pos: np.ndarray, pi: np.ndarray, pj: np.ndarray, crack: CrackSegment | None,
               chunk: int = 1 << 21) -> np.ndarray:
    intact = np.ones(pi.shape[0], dtype=np.uint8)
    if crack is None:
        return intact
    lo = np.minimum(crack.p0, crack.p1)
    hi = np.maximum(crack.p0, crack.p1)
    for s in range(0, pi.shape[0], chunk):
        a = pos[pi[s:s + chunk]]
        b = pos[pj[s:s + chunk]]
        # bounding-box prefilter
        near = ~((np.maximum(a, b) < lo).any(axis=1) | (np.minimum(a, b) > hi).any(axis=1))
        idx = np.nonzero(near)[0]
        if idx.size:
            cut = crosses_crack(a[idx], b[idx], crack)
            intact[s + idx[cut]] = 0
    return intact


@dataclass
class NeighborTable:
    """Symmetric horizon relation stored as unordered pairs ``pi[k] < pj[k]``.

    Per-point entries (neighbor id, weight, distance, direction, intact flag)
    are reconstructed on demand by ``entries``.
    """

    positions: np.ndarray
    weights: np.ndarray | None
    horizon: float
    pi: np.ndarray
    pj: np.ndarray
    intact: np.ndarray
    omega: np.ndarray

    @property
    def num_points(self) -> int:
        return self.positions.shape[0]

    @property
    def num_pairs(self) -> int:
        return self.pi.shape[0]

    @property
    def num_intact(self) -> int:
        return int(self.intact.sum())

    def _csr(self):
        if not hasattr(self, "_csr_cache"):
            n = self.num_points
            rows = np.concatenate([self.pi, self.pj]).astype(np.int64)
            cols = np.concatenate([self.pj, self.pi]).astype(np.int64)
            flags = np.concatenate([self.intact, self.intact])
            order = np.lexsort((cols, rows))
            ptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(np.bincount(rows, minlength=n), out=ptr[1:])
            self._csr_cache = (ptr, cols[order], flags[order])
        return self._csr_cache

    def entries(self, p: int) -> dict:
        ptr, cols, flags = self._csr()
        q = cols[ptr[p]:ptr[p + 1]]
        dx = self.positions[q] - self.positions[p]
        dist = np.hypot(dx[:, 0], dx[:, 1])
        return {
            "q": q,
            "weight": None if self.weights is None else self.weights[q],
            "dist": dist,
            "dir": dx / dist[:, None],
            "intact": flags[ptr[p]:ptr[p + 1]].astype(bool),
        }

    def neighbor_sets(self) -> list[set]:
        ptr, cols, _ = self._csr()
        return [set(cols[ptr[p]:ptr[p + 1]].tolist()) for p in range(self.num_points)]


def build_neighbor_table(positions, horizon: float, crack: CrackSegment | None = None, weights=None,
                         omega=None) -> NeighborTable:
    """Spatial-hash neighbor search (cell size = horizon) plus crack severing."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    pos = np.ascontiguousarray(positions, dtype=np.float64)
    pi, pj = kernels.build_pairs(pos, float(horizon))
    intact = sever_mask(pos, pi, pj, crack)
    om = np.ones(pos.shape[0]) if omega is None else np.ascontiguousarray(omega, dtype=np.float64)
    w = None if weights is None else np.ascontiguousarray(weights, dtype=np.float64)
    return NeighborTable(pos, w, float(horizon), pi, pj, intact, om)


def bond_strain(u_y, u_x, dist, direction):
    """Projected relative displacement over bond length."""
    du = np.asarray(u_y, dtype=float) - np.asarray(u_x, dtype=float)
    return np.sum(du * np.asarray(direction, dtype=float), axis=-1) / np.asarray(dist, dtype=float)


def _prefactor(material: MaterialModel) -> float:
    return 1.0 / (material.horizon ** material.dim * material.unit_volume)


def hydrostatic_strain(p: int, u, table: NeighborTable, material: MaterialModel) -> float:
    """theta at point ``p`` from its own neighbor list (reference path, one point)."""
    e = table.entries(p)
    m = e["intact"]
    q = e["q"][m]
    S = bond_strain(u[q], u[p], e["dist"][m], e["dir"][m])
    J = material.influence(e["dist"][m] / material.horizon)
    return float(_prefactor(material) * np.sum(table.omega[q] * J * S * e["dist"][m] * e["weight"][m]))


def _point_force(p, u, theta, table, material, linearized):
    theta = np.asarray(theta)
    if theta.shape[0] != table.num_points:
        raise ValueError(f"theta has {theta.shape[0]} entries, expected {table.num_points}")
    eps = material.horizon
    e = table.entries(p)
    m = e["intact"]
    q, dist, dirs, wq = e["q"][m], e["dist"][m], e["dir"][m], e["weight"][m]
    S = bond_strain(u[q], u[p], dist, dirs)
    J = material.influence(dist / eps)
    c0 = _prefactor(material)
    f, g = material.pairwise, material.hydrostatic
    if linearized:
        bond = f.d2f0 * S
        gq, gp = g.d2g0 * theta[q], g.d2g0 * theta[p]
    else:
        sq = np.sqrt(dist)
        bond = sq * f.df(sq * S) / dist  # d/dS f(sqrt(d) S), divided by |y - x|
        gq, gp = g.dg(theta[q]), g.dg(theta[p])
    om = table.omega[p] * table.omega[q]
    coefT = 2.0 * c0 / eps * om * J * bond
    coefD = c0 / eps**2 * om * J * (gq + gp)
    return np.sum(((coefT + coefD) * wq)[:, None] * dirs, axis=0)


def force_density(p: int, u, theta, table: NeighborTable, material: MaterialModel) -> np.ndarray:
    """Nonlinear force density at point ``p``; ``theta`` must cover all points."""
    return _point_force(p, u, theta, table, material, linearized=False)


def linearized_force_density(p: int, u, theta, table: NeighborTable, material: MaterialModel) -> np.ndarray:
    return _point_force(p, u, theta, table, material, linearized=True)


class NonlocalContext:
    """Assembled discretization: mesh, quadrature cloud, neighbor table and material.

    Nodal fields are ``(N, 2)`` arrays; flattened they give the interleaved
    x/y ordering used for matrices.
    """

    def __init__(self, mesh: Mesh, material: MaterialModel, boundary: str = "smoothstep", quad_order: int = 2,
                 workers: int = 1):
        self.mesh = mesh
        self.material = material
        self.boundary = boundary
        self.workers = max(int(workers), 1)
        self.quad = build_quad_points(mesh, triangle_rule(quad_order))
        omega = boundary_function(self.quad.positions, mesh.width, mesh.height, material.horizon, boundary)
        self.omega = np.array(np.broadcast_to(omega, (len(self.quad),)), dtype=np.float64)
        self.table = build_neighbor_table(self.quad.positions, material.horizon, mesh.crack,
                                          weights=self.quad.weights, omega=self.omega)
        self.interp = interpolation_matrix(mesh, self.quad.element, self.quad.barycentric)
        self.interp_t = self.interp.T.tocsr()
        self._node_table = None

    @property
    def node_table(self) -> NeighborTable:
        """Node-to-node bonds within the horizon (used by the damage field)."""
        if self._node_table is None:
            self._node_table = build_neighbor_table(self.mesh.nodes, self.material.horizon, self.mesh.crack)
        return self._node_table

    def _args(self):
        t = self.table
        return t.positions, t.weights, t.omega, t.pi, t.pj, t.intact

    def at_quad(self, U) -> np.ndarray:
        return np.ascontiguousarray(self.interp @ np.asarray(U, dtype=float).reshape(-1, 2))

    def theta(self, u_qp) -> np.ndarray:
        pos, w, om, pi, pj, intact = self._args()
        m = self.material
        return kernels.hydrostatic(pos, u_qp, w, om, pi, pj, intact, m.horizon, m.influence.code, self.workers)

    def force_density(self, u_qp, theta=None, linearized: bool = False, absolute: bool = False) -> np.ndarray:
        """Force density at every quadrature point (two-pass: theta, then force)."""
        if theta is None:
            theta = self.theta(u_qp)
        pos, w, om, pi, pj, intact = self._args()
        m = self.material
        f, g = m.pairwise, m.hydrostatic
        gA, gB = (g.Cbar, 0.0) if g.kind == "quadratic" else (g.c_g, g.beta_g)
        fpp0, gpp0 = f.d2f0, g.d2g0
        if absolute:
            fpp0, gpp0 = abs(fpp0), abs(gpp0)
        return kernels.force(pos, u_qp, theta, w, om, pi, pj, intact, m.horizon, m.influence.code, f.c, f.beta,
                             g.code, gA, gB, int(linearized), fpp0, gpp0, self.workers)

    def to_nodes(self, density_qp) -> np.ndarray:
        """Integrate a quadrature-point density against the shape functions."""
        return self.interp_t @ (self.quad.weights[:, None] * density_qp)

    def pd_force(self, U, linearized: bool = False) -> np.ndarray:
        return self.to_nodes(self.force_density(self.at_quad(U), linearized=linearized))

    def apply_linearized_operator(self, U, absolute: bool = False) -> np.ndarray:
        """Stiffness action K_l U, i.e. minus the assembled linearized force."""
        u_qp = self.at_quad(U)
        return -self.to_nodes(self.force_density(u_qp, linearized=True, absolute=absolute))

    def bond_energy_density(self, u_qp) -> np.ndarray:
        pos, w, om, pi, pj, intact = self._args()
        m = self.material
        return kernels.bond_energy(pos, u_qp, w, om, pi, pj, intact, m.horizon, m.influence.code,
                                   m.pairwise.c, m.pairwise.beta, self.workers)

    def hydrostatic_energy_density(self, theta) -> np.ndarray:
        return self.omega * self.material.hydrostatic.g(theta) / self.material.horizon**2


def evaluate_point(x, u_fn, positions, weights, material: MaterialModel, omega_fn=None,
                   theta_fn=None, contributions: bool = False):
    """theta and force density at an arbitrary point ``x`` of a quadrature cloud.

    ``u_fn`` maps (M, 2) positions to displacements; ``theta_fn`` (optional)
    gives theta at the cloud points, otherwise it is computed here by brute
    force. Intended for symmetry checks at locations that are not cloud points.

    Returns:
        (theta, force) or, with ``contributions=True``, (theta, force, per-neighbor
        force vectors, neighbor positions).
    """
    x = np.asarray(x, dtype=float)
    eps = material.horizon
    c0 = _prefactor(material)
    omega_fn = omega_fn or (lambda pts: np.ones(len(pts)))

    def local(z):
        dx = positions - z
        dist = np.hypot(dx[:, 0], dx[:, 1])
        m = (dist > 0) & (dist < eps)
        return m, dist[m], dx[m] / dist[m][:, None]

    def theta_at(z):
        m, dist, dirs = local(z)
        S = bond_strain(u_fn(positions[m]), u_fn(z[None])[0], dist, dirs)
        return c0 * np.sum(omega_fn(positions[m]) * material.influence(dist / eps) * S * dist * weights[m])

    m, dist, dirs = local(x)
    ux = u_fn(x[None])[0]
    S = bond_strain(u_fn(positions[m]), ux, dist, dirs)
    J = material.influence(dist / eps)
    th_x = theta_at(x)
    idx = np.nonzero(m)[0]
    th_q = theta_fn(idx) if theta_fn is not None else np.array([theta_at(positions[k]) for k in idx])
    f, g = material.pairwise, material.hydrostatic
    sq = np.sqrt(dist)
    om = omega_fn(x[None])[0] * omega_fn(positions[m])
    coef = 2.0 * c0 / eps * om * J * sq * f.df(sq * S) / dist + c0 / eps**2 * om * J * (g.dg(th_q) + g.dg(th_x))
    parts = (coef * weights[m])[:, None] * dirs
    if contributions:
        return float(th_x), parts.sum(axis=0), parts, positions[m]
    return float(th_x), parts.sum(axis=0)
