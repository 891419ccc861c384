"""CFL bound for the linearized scheme and its conserved discrete energy."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class CflReport:
    lambda_max: float  # largest eigenvalue of K x = lambda M x [1/s^2]
    dt_max: float  # 2 / sqrt(lambda_max); inf when lambda_max <= 0
    iterations: int
    residual: float
    branch: str  # "assembled" (operator as-is) or "absolute" (|f''(0)|, |g''(0)|)
    psd: bool
    lambda_min: float | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        if not math.isfinite(self.dt_max):
            d["dt_max"] = "infinite"
        return d


def power_iteration(apply_A: Callable, n: int, tol: float = 1e-8, max_iter: int = 5000, seed: int = 0,
                    shift: float = 0.0):
    """Dominant eigenpair of the symmetric operator ``A - shift I``.

    Returns:
        (eigenvalue of A - shift I, unit eigenvector, iterations, relative residual)
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        y = apply_A(x) - shift * x
        lam_new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, x, it, 0.0
        x = y / ny
        if it > 1 and abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    r = apply_A(x) - shift * x - lam * x
    res = float(np.linalg.norm(r) / abs(lam)) if lam != 0 else float(np.linalg.norm(r))
    return lam, x, it, res


def _scaled(apply_K, mass):
    s = 1.0 / np.sqrt(np.asarray(mass, dtype=float).ravel())
    shape = np.shape(mass)

    def op(x):
        return s * np.asarray(apply_K((s * x).reshape(shape)), dtype=float).ravel()

    return op


def estimate_cfl(apply_K: Callable, mass, tol: float = 1e-8, max_iter: int = 5000, seed: int = 0,
                 apply_K_abs: Callable | None = None, probes: int = 8, check_min: bool = True) -> CflReport:
    """Largest generalized eigenvalue of (K, M_lumped) and dt_max = 2 / sqrt(lambda_max).

    ``apply_K`` is the stiffness action (minus the linearized force). If the
    operator is not positive semidefinite on the probes or the lower end of
    its spectrum, ``apply_K_abs`` (built from |f''(0)| and |g''(0)|) is used.
    """
    op = _scaled(apply_K, mass)
    n = int(np.size(mass))
    lam, x, it, res = power_iteration(op, n, tol, max_iter, seed)
    rng = np.random.default_rng(seed + 1)
    psd = lam >= 0.0
    for _ in range(probes):
        v = rng.standard_normal(n)
        if v @ op(v) < 0.0:
            psd = False
    lam_min = None
    if psd and check_min and lam > 0.0:
        mu, _, it2, _ = power_iteration(op, n, max(tol, 1e-6), max_iter, seed + 2, shift=lam)
        lam_min = mu + lam
        it += it2
        if lam_min < -1e-8 * lam:
            psd = False
    branch = "assembled"
    if not psd and apply_K_abs is not None:
        branch = "absolute"
        lam, x, it_abs, res = power_iteration(_scaled(apply_K_abs, mass), n, tol, max_iter, seed)
        it += it_abs
    dt_max = 2.0 / math.sqrt(lam) if lam > 0.0 else math.inf
    return CflReport(float(lam), dt_max, it, res, branch, bool(psd), lam_min)


def discrete_energy(U_k, U_kp1, dt: float, apply_K: Callable, mass) -> float:
    """0.5 * [|v|^2 - dt^2/4 a(v, v) + a(ubar, ubar)] with v = (U_kp1 - U_k)/dt, ubar the midpoint."""
    U_k = np.asarray(U_k, dtype=float)
    U_kp1 = np.asarray(U_kp1, dtype=float)
    v = (U_kp1 - U_k) / dt
    ubar = 0.5 * (U_kp1 + U_k)
    m = np.asarray(mass, dtype=float)
    kin = float(np.sum(m * v * v))
    av = float(np.sum(v * apply_K(v)))
    au = float(np.sum(ubar * apply_K(ubar)))
    return 0.5 * (kin - 0.25 * dt * dt * av + au)


def dense_operator(apply_K: Callable, shape) -> np.ndarray:
    """Explicit matrix of a linear nodal operator (column by column)."""
    n = int(np.prod(shape))
    K = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        K[:, j] = np.asarray(apply_K(e.reshape(shape)), dtype=float).ravel()
        e[j] = 0.0
    return K
