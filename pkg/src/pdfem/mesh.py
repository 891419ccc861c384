"""Structured triangle meshes, linear shape functions and triangle quadrature.

Node numbering is row-major: node ``j * (nx + 1) + i`` sits at ``(i h, j h)``.
Every square cell is split along its (0,0)-(1,1) diagonal into two
counter-clockwise triangles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MeshError(ValueError):
    """Raised for invalid mesh parameters or point-location failures."""


@dataclass(frozen=True)
class CrackSegment:
    """Straight pre-crack from ``p0`` to ``p1``; ``p1`` is taken as the tip."""

    p0: tuple[float, float]
    p1: tuple[float, float]

    def __post_init__(self):
        p0 = (float(self.p0[0]), float(self.p0[1]))
        p1 = (float(self.p1[0]), float(self.p1[1]))
        if p0 == p1:
            raise MeshError("crack endpoints coincide")
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)

    @property
    def length(self) -> float:
        return float(np.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]))

    @property
    def direction(self) -> np.ndarray:
        d = np.subtract(self.p1, self.p0)
        return d / np.linalg.norm(d)


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray  # (N, 2)
    elements: np.ndarray  # (E, 3) int, counter-clockwise
    node_tags: tuple[frozenset, ...]
    h: float
    width: float
    height: float
    shape: tuple[int, int]  # cells along x and y
    crack: CrackSegment | None = None

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    def element_areas(self) -> np.ndarray:
        return signed_areas(self.nodes, self.elements)

    def nodes_tagged(self, tag: str) -> np.ndarray:
        return np.array([i for i, t in enumerate(self.node_tags) if tag in t], dtype=np.int64)

    def edges(self) -> np.ndarray:
        """Unique undirected element edges as an (M, 2) array with i < j."""
        e = self.elements
        pairs = np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]])
        pairs.sort(axis=1)
        return np.unique(pairs, axis=0)


def signed_areas(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    a, b, c = (nodes[elements[:, k]] for k in range(3))
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


def _cells(length: float, h: float, name: str) -> int:
    n = int(round(length / h))
    if n < 1 or abs(n * h - length) > 1e-9 * max(length, h):
        raise MeshError(f"mesh size h={h!r} does not divide {name}={length!r}")
    return n


def _on_grid(value: float, h: float, scale: float) -> bool:
    return abs(value / h - round(value / h)) * h <= 1e-9 * scale


def build_uniform_mesh(width: float, height: float, h: float, crack: CrackSegment | None = None) -> Mesh:
    """Uniform two-triangles-per-cell mesh of ``[0, width] x [0, height]``.

    The crack is stored, not cut into the mesh; it must lie on a grid line
    with both endpoints on grid nodes.
    """
    if not h > 0:
        raise MeshError("mesh size must be positive")
    nx = _cells(width, h, "width")
    ny = _cells(height, h, "height")

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # row-major: y outer, x inner
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    n00 = (j * (nx + 1) + i).ravel()
    n10 = n00 + 1
    n01 = n00 + nx + 1
    n11 = n01 + 1
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    # interleave so element 2c and 2c+1 belong to cell c
    elements = np.empty((2 * nx * ny, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper

    scale = max(width, height)
    if crack is not None:
        (x0, y0), (x1, y1) = crack.p0, crack.p1
        for x, y in (crack.p0, crack.p1):
            if not (-1e-12 * scale <= x <= width + 1e-12 * scale and -1e-12 * scale <= y <= height + 1e-12 * scale):
                raise MeshError("crack endpoint outside the domain")
            if not (_on_grid(x, h, scale) and _on_grid(y, h, scale)):
                raise MeshError(f"crack endpoint ({x}, {y}) is not on a grid node")
        if not (abs(x0 - x1) <= 1e-12 * scale or abs(y0 - y1) <= 1e-12 * scale):
            raise MeshError("crack must be aligned with a mesh line (horizontal or vertical)")

    tol = 1e-9 * h
    tags = []
    for x, y in nodes:
        t = set()
        if y <= tol:
            t.add("bottom")
        if y >= height - tol:
            t.add("top")
        if x <= tol:
            t.add("left")
        if x >= width - tol:
            t.add("right")
        tags.append(frozenset(t) if t else frozenset({"interior"}))

    return Mesh(nodes, elements, tuple(tags), float(h), float(width), float(height), (nx, ny), crack)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, 3) barycentric
    weights: np.ndarray  # (n,), sums to 1
    degree: int


def triangle_rule(order: int = 2) -> QuadratureRule:
    if order == 1:
        return QuadratureRule(np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0]), 1)
    if order == 2:
        a, b = 2.0 / 3.0, 1.0 / 6.0
        pts = np.array([[a, b, b], [b, a, b], [b, b, a]])
        return QuadratureRule(pts, np.full(3, 1.0 / 3.0), 2)
    raise ValueError(f"unsupported quadrature order {order}")


def shape_values(element, barycentric) -> np.ndarray:
    """Linear shape function values; on a simplex these are the barycentrics."""
    lam = np.asarray(barycentric, dtype=float)
    return lam.copy()


def shape_gradients(mesh: Mesh) -> np.ndarray:
    """Constant gradients of the three shape functions per element, (E, 3, 2)."""
    p = mesh.nodes[mesh.elements]
    area2 = 2.0 * mesh.element_areas()
    grads = np.empty((mesh.num_elements, 3, 2))
    for k in range(3):
        a = p[:, (k + 1) % 3]
        b = p[:, (k + 2) % 3]
        grads[:, k, 0] = (a[:, 1] - b[:, 1]) / area2
        grads[:, k, 1] = (b[:, 0] - a[:, 0]) / area2
    return grads


@dataclass(frozen=True)
class QuadPointSet:
    positions: np.ndarray  # (Q, 2)
    weights: np.ndarray  # (Q,)
    element: np.ndarray  # (Q,)
    barycentric: np.ndarray  # (Q, 3)

    def __len__(self):
        return self.positions.shape[0]


def build_quad_points(mesh: Mesh, rule: QuadratureRule) -> QuadPointSet:
    areas = mesh.element_areas()
    nq = rule.points.shape[0]
    corners = mesh.nodes[mesh.elements]  # (E, 3, 2)
    pos = np.einsum("qk,ekd->eqd", rule.points, corners).reshape(-1, 2)
    weights = (areas[:, None] * rule.weights[None, :]).ravel()
    element = np.repeat(np.arange(mesh.num_elements), nq)
    bary = np.tile(rule.points, (mesh.num_elements, 1))
    return QuadPointSet(pos, weights, element, bary)


def locate(mesh: Mesh, points) -> tuple[np.ndarray, np.ndarray]:
    """Owning element and barycentric coordinates for each point.

    Points on shared edges are assigned to one of the adjacent elements, which
    is harmless for continuous interpolants.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nx, ny = mesh.shape
    h = mesh.h
    tol = 1e-12 * max(mesh.width, mesh.height)
    outside = (
        (pts[:, 0] < -tol) | (pts[:, 0] > mesh.width + tol) | (pts[:, 1] < -tol) | (pts[:, 1] > mesh.height + tol)
    )
    if np.any(outside):
        bad = pts[np.argmax(outside)]
        raise MeshError(f"point ({bad[0]}, {bad[1]}) lies outside the mesh")
    ci = np.clip(np.floor(pts[:, 0] / h).astype(np.int64), 0, nx - 1)
    cj = np.clip(np.floor(pts[:, 1] / h).astype(np.int64), 0, ny - 1)
    lx = pts[:, 0] / h - ci
    ly = pts[:, 1] / h - cj
    upper = ly > lx
    cell = cj * nx + ci
    elem = 2 * cell + upper.astype(np.int64)
    bary = np.empty((pts.shape[0], 3))
    # lower triangle (n00, n10, n11): x = n00 + s*e_x + t*(e_x+e_y)
    bary[~upper, 0] = 1.0 - lx[~upper]
    bary[~upper, 1] = lx[~upper] - ly[~upper]
    bary[~upper, 2] = ly[~upper]
    # upper triangle (n00, n11, n01)
    bary[upper, 0] = 1.0 - ly[upper]
    bary[upper, 1] = lx[upper]
    bary[upper, 2] = ly[upper] - lx[upper]
    return elem, bary


def interpolate(mesh: Mesh, nodal_field, points) -> np.ndarray:
    """Evaluate the piecewise-linear interpolant of ``nodal_field`` at ``points``."""
    field_ = np.asarray(nodal_field, dtype=float)
    single = np.ndim(points) == 1
    elem, bary = locate(mesh, points)
    vals = np.einsum("pk,pk...->p...", bary, field_[mesh.elements[elem]])
    return vals[0] if single else vals


def interpolation_matrix(mesh: Mesh, elem: np.ndarray, bary: np.ndarray):
    """Sparse (P, N) matrix mapping nodal values to values at located points."""
    from scipy import sparse

    rows = np.repeat(np.arange(elem.shape[0]), 3)
    cols = mesh.elements[elem].ravel()
    return sparse.csr_matrix((bary.ravel(), (rows, cols)), shape=(elem.shape[0], mesh.num_nodes))
