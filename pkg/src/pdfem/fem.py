"""Mass matrices, force vectors and L2 projection for linear triangles.

Global vectors are (N, 2) nodal arrays. Matrices act on the interleaved
flattening ``[u0x, u0y, u1x, u1y, ...]``.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg

from pdfem.mesh import Mesh, QuadratureRule, build_quad_points, interpolation_matrix, triangle_rule


class ProjectionError(RuntimeError):
    pass


_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def scalar_mass(mesh: Mesh, rho: float = 1.0) -> sparse.csr_matrix:
    areas = mesh.element_areas()
    vals = rho * areas[:, None, None] * _LOCAL_MASS[None]
    rows = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    n = mesh.num_nodes
    return sparse.csr_matrix((vals.ravel(), (rows, cols)), shape=(n, n))


def assemble_mass(mesh: Mesh, rho: float) -> sparse.csr_matrix:
    """Consistent vector mass matrix, 2N x 2N."""
    return sparse.kron(scalar_mass(mesh, rho), sparse.identity(2), format="csr")


def lump(M) -> sparse.dia_matrix:
    """Row-sum lumping; returns a diagonal sparse matrix."""
    diag = np.asarray(M.sum(axis=1)).ravel()
    if np.any(diag <= 0.0):
        bad = int(np.argmax(diag <= 0.0))
        raise ValueError(f"nonpositive lumped mass at row {bad}; mesh is degenerate")
    return sparse.diags(diag, format="dia")


def lumped_nodal_mass(mesh: Mesh, rho: float) -> np.ndarray:
    """Lumped mass as an (N, 2) array matching nodal vector layout."""
    return lump(assemble_mass(mesh, rho)).diagonal().reshape(-1, 2)


def body_force_vector(ctx, t: float, body_force) -> np.ndarray:
    if body_force is None:
        return np.zeros((ctx.mesh.num_nodes, 2))
    b = np.broadcast_to(np.asarray(body_force(ctx.quad.positions, t), dtype=float), (len(ctx.quad), 2))
    return ctx.to_nodes(b)


def assemble_force(ctx, U, t: float = 0.0, body_force=None, linearized: bool = False) -> np.ndarray:
    """Nodal force F = F_pd(U) + int N^T b(x, t) dx.

    ``body_force(points, t)`` returns (Q, 2) values or a broadcastable 2-vector.
    """
    F = ctx.pd_force(U, linearized=linearized)
    if body_force is not None:
        F = F + body_force_vector(ctx, t, body_force)
    return F


def l2_project(mesh: Mesh, values, rule: QuadratureRule | None = None, rtol: float = 1e-12) -> np.ndarray:
    """L2 projection onto continuous piecewise-linear fields.

    Args:
        mesh: triangulation.
        values: callable mapping (Q, 2) points to (Q,) or (Q, k) values, or an
            array of samples at the quadrature points of ``rule``.
        rule: quadrature for the right-hand side (defaults to the degree-2 rule).

    Returns:
        Nodal coefficients with the same trailing shape as the samples.
    """
    rule = rule or triangle_rule(2)
    quad = build_quad_points(mesh, rule)
    samples = values(quad.positions) if callable(values) else values
    samples = np.asarray(samples, dtype=float)
    P = interpolation_matrix(mesh, quad.element, quad.barycentric)
    flat = samples.reshape(len(quad), -1)
    rhs = P.T @ (quad.weights[:, None] * flat)
    Ms = scalar_mass(mesh)
    dinv = 1.0 / Ms.diagonal()
    precond = LinearOperator(Ms.shape, matvec=lambda r: dinv * r)
    n = mesh.num_nodes
    out = np.empty_like(rhs)
    for k in range(rhs.shape[1]):
        b = rhs[:, k]
        if not np.any(b):
            out[:, k] = 0.0
            continue
        x, info = cg(Ms, b, x0=dinv * b, rtol=rtol, atol=0.0, maxiter=10 * n, M=precond)
        if info != 0:
            raise ProjectionError(f"CG did not converge in {10 * n} iterations (info={info})")
        out[:, k] = x
    return out.reshape((n,) + samples.shape[1:])


def l2_norm(mesh: Mesh, nodal_field, Ms=None) -> float:
    """Exact L2 norm of a piecewise-linear field (consistent scalar mass)."""
    Ms = scalar_mass(mesh) if Ms is None else Ms
    v = np.asarray(nodal_field, dtype=float).reshape(mesh.num_nodes, -1)
    return float(np.sqrt(max(np.sum(v * (Ms @ v)), 0.0)))


def dump_matrix(path, M) -> None:
    from scipy.io import mmwrite

    mmwrite(str(path), sparse.coo_matrix(M))
