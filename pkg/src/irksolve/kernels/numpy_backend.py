"""Pure-numpy reference implementations of the block kernels.

Same algorithms and loop orderings as the numba backend, so the two
produce bitwise-identical results on the same inputs.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

COND_LIMIT = 1e14


def _block_pos(indptr, indices, i, j):
    """Index of block (i, j) in the data array, or -1 if not in pattern."""
    lo, hi = indptr[i], indptr[i + 1]
    for k in range(lo, hi):
        if indices[k] == j:
            return k
    return -1


def bsr_matvec(indptr, indices, data, x):
    T = len(indptr) - 1
    m = data.shape[1]
    xb = x.reshape(T, m)
    y = np.zeros((T, m))
    for i in range(T):
        for k in range(indptr[i], indptr[i + 1]):
            y[i] += data[k] @ xb[indices[k]]
    return y.ravel()


def _inv_with_cond(block):
    """Inverse plus a 1-norm condition estimate; (zeros, inf) when singular."""
    det = np.linalg.det(block)
    if det == 0.0 or not np.isfinite(det):
        return np.zeros_like(block), np.inf
    inv = np.linalg.inv(block)
    cond = np.abs(block).sum(axis=0).max() * np.abs(inv).sum(axis=0).max()
    return inv, cond


def ilu0_factor(indptr, indices, diag_pos, data, keep, simplified):
    """Block ILU(0) on the stored pattern; dropped (keep=False) blocks are
    zeroed and never used for updates.

    Returns (factor data, diagonal inverses, failed element or -1).
    """
    T = len(indptr) - 1
    m = data.shape[1]
    f = data.copy()
    for k in range(len(keep)):
        if not keep[k]:
            f[k] = 0.0
    dinv = np.zeros((T, m, m))
    for i in range(T):
        inv_ii, cond = _inv_with_cond(f[diag_pos[i]])
        if not np.isfinite(cond) or cond > COND_LIMIT:
            return f, dinv, i
        dinv[i] = inv_ii
        for kij in range(diag_pos[i] + 1, indptr[i + 1]):
            j = indices[kij]
            if not keep[kij]:
                continue
            kji = _block_pos(indptr, indices, j, i)
            f[kji] = f[kji] @ inv_ii
            f[diag_pos[j]] = f[diag_pos[j]] - f[kji] @ f[kij]
            if not simplified:
                # fill-limited updates to blocks (j, k2) with k2 > j a
                # neighbor of both i and j
                for kik in range(indptr[i], indptr[i + 1]):
                    k2 = indices[kik]
                    if k2 <= j or k2 == i or not keep[kik]:
                        continue
                    kjk = _block_pos(indptr, indices, j, k2)
                    if kjk >= 0 and keep[kjk]:
                        f[kjk] = f[kjk] - f[kji] @ f[kik]
    return f, dinv, -1


def ilu0_solve(indptr, indices, diag_pos, fdata, dinv, keep, y):
    """x = U^-1 L^-1 y by block forward/back substitution."""
    T = len(indptr) - 1
    m = fdata.shape[1]
    z = y.reshape(T, m).copy()
    for i in range(T):
        for k in range(indptr[i], diag_pos[i]):
            if keep[k]:
                z[i] -= fdata[k] @ z[indices[k]]
    x = z
    for i in range(T - 1, -1, -1):
        acc = x[i].copy()
        for k in range(diag_pos[i] + 1, indptr[i + 1]):
            if keep[k]:
                acc -= fdata[k] @ x[indices[k]]
        x[i] = dinv[i] @ acc
    return x.ravel()


def coupled_factor(indptr, indices, diag_pos, stage_data, coupling, keep, literal):
    """Stage-coupled block ILU(0) of the transformed IRK operator.

    stage_data: (s, nnzb, m, m) per-stage diagonal blocks
    A^-1_kk M - dt J_k on the Jacobian pattern.
    coupling: (s, s, T, m, m); entry (k, l, i) is A^-1_kl M_i for k != l.
    Cross-stage Schur updates use the upper coupling block (standard form)
    unless ``literal`` is set, which reproduces the printed update using
    the stage diagonal itself.

    Returns (stage factors, coupling factors, diagonal inverses,
    failed stage or -1, failed element or -1).
    """
    s = stage_data.shape[0]
    T = len(indptr) - 1
    m = stage_data.shape[2]
    f = stage_data.copy()
    for k in range(len(keep)):
        if not keep[k]:
            f[:, k] = 0.0
    g = coupling.copy()
    dinv = np.zeros((s, T, m, m))
    for k in range(s):
        for i in range(T):
            inv_ii, cond = _inv_with_cond(f[k, diag_pos[i]])
            if not np.isfinite(cond) or cond > COND_LIMIT:
                return f, g, dinv, k, i
            dinv[k, i] = inv_ii
            for kij in range(diag_pos[i] + 1, indptr[i + 1]):
                if not keep[kij]:
                    continue
                j = indices[kij]
                kji = _block_pos(indptr, indices, j, i)
                f[k, kji] = f[k, kji] @ inv_ii
                f[k, diag_pos[j]] = f[k, diag_pos[j]] - f[k, kji] @ f[k, kij]
            for l in range(k + 1, s):
                g[l, k, i] = g[l, k, i] @ inv_ii
                if literal:
                    g_update = g[l, k, i] @ f[k, diag_pos[i]]
                else:
                    g_update = g[l, k, i] @ g[k, l, i]
                f[l, diag_pos[i]] = f[l, diag_pos[i]] - g_update
    return f, g, dinv, -1, -1


def coupled_solve(indptr, indices, diag_pos, fstage, fcoupling, dinv, keep, y):
    """Forward/back substitution over the stage-major (k, i) block grid."""
    s = fstage.shape[0]
    T = len(indptr) - 1
    m = fstage.shape[2]
    z = y.reshape(s, T, m).copy()
    for k in range(s):
        for i in range(T):
            for kk in range(indptr[i], diag_pos[i]):
                if keep[kk]:
                    z[k, i] -= fstage[k, kk] @ z[k, indices[kk]]
            for l in range(k):
                z[k, i] -= fcoupling[k, l, i] @ z[l, i]
    x = z
    for k in range(s - 1, -1, -1):
        for i in range(T - 1, -1, -1):
            acc = x[k, i].copy()
            for kk in range(diag_pos[i] + 1, indptr[i + 1]):
                if keep[kk]:
                    acc -= fstage[k, kk] @ x[k, indices[kk]]
            for l in range(k + 1, s):
                acc -= fcoupling[k, l, i] @ x[l, i]
            x[k, i] = dinv[k, i] @ acc
    return x.ravel()
