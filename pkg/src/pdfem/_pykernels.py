"""Pure numpy implementation of the bond-pair kernels.

Same signatures and conventions as the compiled ``_ckernels`` module. Bonds are
stored once as ``(pi[k], pj[k])`` with ``pi < pj``; every pair loop scatters
the contribution to both ends.
"""

import math

import numpy as np

BACKEND = "python"
_CHUNK = 1 << 20


def _influence(r, jcode):
    if jcode == 0:
        return np.where(r < 1.0, 1.0 - r, 0.0)
    return np.where(r < 1.0, 1.0, 0.0)


def build_pairs(pos, eps):
    """All pairs ``i < j`` with ``0 < |x_j - x_i| < eps``, sorted by (i, j)."""
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    n = pos.shape[0]
    if n == 0:
        return np.zeros(0, np.int32), np.zeros(0, np.int32)
    lo = pos.min(axis=0)
    cell = np.floor((pos - lo) / eps).astype(np.int64)
    ncx = int(cell[:, 0].max()) + 1
    ncy = int(cell[:, 1].max()) + 1
    cid = cell[:, 1] * ncx + cell[:, 0]
    order = np.argsort(cid, kind="stable")
    starts = np.searchsorted(cid[order], np.arange(ncx * ncy + 1))
    eps2 = eps * eps
    out_i, out_j = [], []
    for cy in range(ncy):
        for cx in range(ncx):
            c = cy * ncx + cx
            mine = order[starts[c]:starts[c + 1]]
            if mine.size == 0:
                continue
            cand = [
                order[starts[yy * ncx + xx]:starts[yy * ncx + xx + 1]]
                for yy in range(max(cy - 1, 0), min(cy + 2, ncy))
                for xx in range(max(cx - 1, 0), min(cx + 2, ncx))
            ]
            cand = np.concatenate(cand)
            dx = pos[cand][None, :, 0] - pos[mine][:, None, 0]
            dy = pos[cand][None, :, 1] - pos[mine][:, None, 1]
            d2 = dx * dx + dy * dy
            keep = (d2 < eps2) & (d2 > 0.0) & (cand[None, :] > mine[:, None])
            a, b = np.nonzero(keep)
            out_i.append(mine[a])
            out_j.append(cand[b])
    pi = np.concatenate(out_i) if out_i else np.zeros(0, np.int64)
    pj = np.concatenate(out_j) if out_j else np.zeros(0, np.int64)
    srt = np.lexsort((pj, pi))
    return pi[srt].astype(np.int32), pj[srt].astype(np.int32)


def _geometry(pos, i, j):
    dx = pos[j] - pos[i]
    d = np.sqrt(dx[:, 0] * dx[:, 0] + dx[:, 1] * dx[:, 1])
    e = dx / d[:, None]
    return d, e


def _chunks(npairs):
    for s in range(0, npairs, _CHUNK):
        yield slice(s, min(s + _CHUNK, npairs))


def hydrostatic(pos, u, w, omega, pi, pj, intact, eps, jcode, nthreads=1):
    n = pos.shape[0]
    c0 = 1.0 / (eps * eps * math.pi)
    theta = np.zeros(n)
    keep = intact.astype(bool)
    for sl in _chunks(pi.shape[0]):
        i = pi[sl][keep[sl]]
        j = pj[sl][keep[sl]]
        d, e = _geometry(pos, i, j)
        du = u[j] - u[i]
        sd = du[:, 0] * e[:, 0] + du[:, 1] * e[:, 1]
        base = c0 * _influence(d / eps, jcode) * sd
        theta += np.bincount(i, w[j] * omega[j] * base, minlength=n)
        theta += np.bincount(j, w[i] * omega[i] * base, minlength=n)
    return theta


def force(pos, u, theta, w, omega, pi, pj, intact, eps, jcode, c, beta, gcode, gA, gB,
          linearized, fpp0, gpp0, nthreads=1):
    """Force density per point; ``gA, gB`` are (Cbar, unused) or (c_g, beta_g)."""
    n = pos.shape[0]
    c0 = 1.0 / (eps * eps * math.pi)
    if linearized:
        gprime = gpp0 * theta
    elif gcode == 0:
        gprime = gA * theta
    else:
        gprime = 2.0 * gA * gB * theta * np.exp(-gB * theta * theta)
    out = np.zeros((n, 2))
    keep = intact.astype(bool)
    for sl in _chunks(pi.shape[0]):
        i = pi[sl][keep[sl]]
        j = pj[sl][keep[sl]]
        d, e = _geometry(pos, i, j)
        du = u[j] - u[i]
        S = (du[:, 0] * e[:, 0] + du[:, 1] * e[:, 1]) / d
        if linearized:
            ft = fpp0 * S
        else:
            ft = 2.0 * c * beta * S * np.exp(-beta * d * S * S)
        wJ = omega[i] * omega[j] * _influence(d / eps, jcode)
        coef = wJ * (2.0 * c0 / eps * ft + c0 / (eps * eps) * (gprime[i] + gprime[j]))
        for k in range(2):
            out[:, k] += np.bincount(i, w[j] * coef * e[:, k], minlength=n)
            out[:, k] -= np.bincount(j, w[i] * coef * e[:, k], minlength=n)
    return out


def bond_energy(pos, u, w, omega, pi, pj, intact, eps, jcode, c, beta, nthreads=1):
    """Pairwise energy density ``(1/(eps^d w_d)) int |y-x| W dy`` per point."""
    n = pos.shape[0]
    c0 = 1.0 / (eps * eps * math.pi)
    out = np.zeros(n)
    keep = intact.astype(bool)
    for sl in _chunks(pi.shape[0]):
        i = pi[sl][keep[sl]]
        j = pj[sl][keep[sl]]
        d, e = _geometry(pos, i, j)
        du = u[j] - u[i]
        S = (du[:, 0] * e[:, 0] + du[:, 1] * e[:, 1]) / d
        val = c0 / eps * omega[i] * omega[j] * _influence(d / eps, jcode) * c * (1.0 - np.exp(-beta * d * S * S))
        out += np.bincount(i, w[j] * val, minlength=n)
        out += np.bincount(j, w[i] * val, minlength=n)
    return out


def damage(pos, u, pi, pj, intact, r_plus):
    """Max over bonds of S / S_c^+ with S_c^+ = r_plus / sqrt(|xi|); floored at 0."""
    n = pos.shape[0]
    Z = np.zeros(n)
    keep = intact.astype(bool)
    i = pi[keep]
    j = pj[keep]
    if i.size == 0:
        return Z
    d, e = _geometry(pos, i, j)
    du = u[j] - u[i]
    S = (du[:, 0] * e[:, 0] + du[:, 1] * e[:, 1]) / d
    ratio = S * np.sqrt(d) / r_plus
    np.maximum.at(Z, i, ratio)
    np.maximum.at(Z, j, ratio)
    return Z
