"""Pure-numpy implementations of the numerical kernels.

This is the fallback backend. It avoids per-observation Python loops by
bucketing observations on choice-set size, so every bucket becomes a dense
(m_k, k) problem handled with fancy indexing and ``np.add.at`` scatters.
The numba backend implements the same contracts with scalar loops; the two
must agree to floating-point noise (covered by the backend-agreement tests).
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def _buckets(set_offsets: np.ndarray) -> list[tuple[int, np.ndarray]]:
    """Group observation indices by choice-set size."""
    sizes = np.diff(set_offsets)
    out = []
    for k in np.unique(sizes):
        out.append((int(k), np.nonzero(sizes == k)[0]))
    return out


def _gather(set_items, set_offsets, idx, k):
    """(len(idx), k) matrix of the bucket's choice sets."""
    starts = set_offsets[idx]
    return set_items[starts[:, None] + np.arange(k)[None, :]]


def _log_softmax(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise (log-probabilities, probabilities) with max subtraction."""
    mx = logits.max(axis=1, keepdims=True)
    shifted = logits - mx
    ex = np.exp(shifted)
    denom = ex.sum(axis=1, keepdims=True)
    return shifted - np.log(denom), ex / denom


# --- Plackett-Luce / MNL ----------------------------------------------------


def pl_choice_logprobs(theta, set_items, set_offsets, winner_pos):
    m = len(winner_pos)
    out = np.zeros(m)
    for k, idx in _buckets(set_offsets):
        items = _gather(set_items, set_offsets, idx, k)
        logp, _ = _log_softmax(theta[items])
        out[idx] = logp[np.arange(len(idx)), winner_pos[idx]]
    return out


def pl_nll_grad(theta, set_items, set_offsets, winner_pos, weights):
    n = theta.shape[0]
    nll = 0.0
    grad = np.zeros(n)
    for k, idx in _buckets(set_offsets):
        items = _gather(set_items, set_offsets, idx, k)
        logp, p = _log_softmax(theta[items])
        rows = np.arange(len(idx))
        w = weights[idx]
        nll -= float(w @ logp[rows, winner_pos[idx]])
        resid = p * w[:, None]
        resid[rows, winner_pos[idx]] -= w
        np.add.at(grad, items, resid)
    return nll, grad


# --- full CDM/CRS -----------------------------------------------------------


def _pair_slots(items: np.ndarray, n: int) -> np.ndarray:
    """slots[i, a, b] = flat index of the ordered pair (items[i,a], items[i,b]).

    Diagonal entries (a = b) are clamped to slot 0; callers must mask them.
    """
    x = items[:, :, None]
    z = items[:, None, :]
    slots = x * (n - 1) + z - (z > x)
    k = items.shape[1]
    diag = np.eye(k, dtype=bool)[None, :, :]
    return np.where(diag, 0, slots)


def crs_full_choice_logprobs(u, n, set_items, set_offsets, winner_pos):
    m = len(winner_pos)
    out = np.zeros(m)
    for k, idx in _buckets(set_offsets):
        items = _gather(set_items, set_offsets, idx, k)
        slots = _pair_slots(items, n)
        off = ~np.eye(k, dtype=bool)
        logits = (u[slots] * off[None, :, :]).sum(axis=2)
        logp, _ = _log_softmax(logits)
        out[idx] = logp[np.arange(len(idx)), winner_pos[idx]]
    return out


def crs_full_nll_grad(u, n, set_items, set_offsets, winner_pos, weights):
    nll = 0.0
    grad = np.zeros(n * (n - 1))
    for k, idx in _buckets(set_offsets):
        items = _gather(set_items, set_offsets, idx, k)
        slots = _pair_slots(items, n)
        off = ~np.eye(k, dtype=bool)
        logits = (u[slots] * off[None, :, :]).sum(axis=2)
        logp, p = _log_softmax(logits)
        rows = np.arange(len(idx))
        w = weights[idx]
        nll -= float(w @ logp[rows, winner_pos[idx]])
        resid = p * w[:, None]
        resid[rows, winner_pos[idx]] -= w
        # residual of candidate a lands on every slot (a, b), b in S \ a
        slots_off = slots[:, off]
        resid_rep = np.repeat(resid, k - 1, axis=1)
        np.add.at(grad, slots_off, resid_rep)
    return nll, grad


# --- factorized CDM/CRS -----------------------------------------------------


def _factor_logits(T, C, items):
    trows = T[items]  # (m, k, r)
    crows = C[items]
    ctx = crows.sum(axis=1, keepdims=True) - crows  # sum of c_z over the others
    return trows, ctx, (trows * ctx).sum(axis=2)


def crs_factor_choice_logprobs(T, C, set_items, set_offsets, winner_pos):
    m = len(winner_pos)
    out = np.zeros(m)
    for k, idx in _buckets(set_offsets):
        items = _gather(set_items, set_offsets, idx, k)
        _, _, logits = _factor_logits(T, C, items)
        logp, _ = _log_softmax(logits)
        out[idx] = logp[np.arange(len(idx)), winner_pos[idx]]
    return out


def crs_factor_nll_grad(T, C, set_items, set_offsets, winner_pos, weights):
    nll = 0.0
    grad_t = np.zeros_like(T)
    grad_c = np.zeros_like(C)
    for k, idx in _buckets(set_offsets):
        items = _gather(set_items, set_offsets, idx, k)
        trows, ctx, logits = _factor_logits(T, C, items)
        logp, p = _log_softmax(logits)
        rows = np.arange(len(idx))
        w = weights[idx]
        nll -= float(w @ logp[rows, winner_pos[idx]])
        resid = p * w[:, None]
        resid[rows, winner_pos[idx]] -= w
        # d/dt_y = r_y * sum_{z in S\y} c_z; d/dc_z = sum_{y in S\z} r_y t_y
        np.add.at(grad_t, items, resid[:, :, None] * ctx)
        rt = resid[:, :, None] * trows
        np.add.at(grad_c, items, rt.sum(axis=1, keepdims=True) - rt)
    return nll, grad_t, grad_c


# --- sampling ---------------------------------------------------------------


def sample_pairwise(theta, U, uniforms):
    """Draw full rankings by sequential inverse-CDF selection.

    Stage utilities for item y over the remaining set S are
    theta[y] + sum_{z in S, z != y} U[y, z]; Plackett-Luce uses U = 0, pure
    CDM kernels use theta = 0. ``uniforms`` has shape (count, n-1); sample i
    consumes row i only, so results do not depend on evaluation order.

    The winner of a stage is the lowest remaining item index whose inclusive
    cumulative probability reaches the uniform draw; if rounding leaves the
    draw above the final cumulative value, the highest remaining index wins.
    """
    count, n_minus_1 = uniforms.shape
    n = n_minus_1 + 1
    out = np.empty((count, n), dtype=np.int64)
    alive = np.ones((count, n), dtype=bool)
    rows = np.arange(count)
    for stage in range(n - 1):
        expo = theta[None, :] + alive.astype(np.float64) @ U.T
        expo = np.where(alive, expo, -np.inf)
        mx = expo.max(axis=1, keepdims=True)
        p = np.exp(expo - mx)
        p /= p.sum(axis=1, keepdims=True)
        cum = np.cumsum(p, axis=1)
        hit = (cum >= uniforms[:, stage, None]) & alive
        winner = hit.argmax(axis=1)
        none_hit = ~hit.any(axis=1)
        if none_hit.any():
            last_alive = n - 1 - alive[:, ::-1].argmax(axis=1)
            winner = np.where(none_hit, last_alive, winner)
        out[:, stage] = winner
        alive[rows, winner] = False
    out[:, n - 1] = alive.argmax(axis=1)
    return out


# --- dense symmetric eigenvalues (cyclic Jacobi) ------------------------------


def jacobi_eigvalsh(A, tol=1e-11, max_sweeps=100):
    """Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.

    Sweeps run until the off-diagonal Frobenius norm is at most ``tol``.
    Row/column rotations are applied in a fixed (p, q) order so the numba
    twin produces bit-identical iterates.
    """
    A = np.array(A, dtype=np.float64, copy=True)
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy()
    for _ in range(max_sweeps):
        off = A - np.diag(np.diag(A))
        if np.sqrt((off * off).sum()) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
    else:
        raise RuntimeError(f"Jacobi sweep did not converge in {max_sweeps} sweeps")
    return np.sort(np.diag(A))
