"""Numba implementations of the numerical kernels.

Default backend. Every function mirrors a pure-numpy twin in
``_kernels_numpy``; the twin is the reference for the shared contracts and
the backend-agreement tests. Loops here are scalar on purpose: packed
choice datasets with ragged set sizes JIT well and need no bucketing.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

NAME = "numba"


@njit(cache=True)
def pl_choice_logprobs(theta, set_items, set_offsets, winner_pos):
    m = winner_pos.shape[0]
    out = np.zeros(m)
    for j in range(m):
        lo = set_offsets[j]
        hi = set_offsets[j + 1]
        mx = -np.inf
        for t in range(lo, hi):
            v = theta[set_items[t]]
            if v > mx:
                mx = v
        ssum = 0.0
        for t in range(lo, hi):
            ssum += np.exp(theta[set_items[t]] - mx)
        win = set_items[lo + winner_pos[j]]
        out[j] = (theta[win] - mx) - np.log(ssum)
    return out


@njit(cache=True)
def pl_nll_grad(theta, set_items, set_offsets, winner_pos, weights):
    n = theta.shape[0]
    m = winner_pos.shape[0]
    grad = np.zeros(n)
    nll = 0.0
    for j in range(m):
        lo = set_offsets[j]
        hi = set_offsets[j + 1]
        mx = -np.inf
        for t in range(lo, hi):
            v = theta[set_items[t]]
            if v > mx:
                mx = v
        ssum = 0.0
        for t in range(lo, hi):
            ssum += np.exp(theta[set_items[t]] - mx)
        w = weights[j]
        win = set_items[lo + winner_pos[j]]
        nll -= w * ((theta[win] - mx) - np.log(ssum))
        for t in range(lo, hi):
            item = set_items[t]
            grad[item] += w * np.exp(theta[item] - mx) / ssum
        grad[win] -= w
    return nll, grad


@njit(cache=True, inline="always")
def _pair_slot(x, z, n):
    s = x * (n - 1) + z
    if z > x:
        s -= 1
    return s


@njit(cache=True)
def crs_full_choice_logprobs(u, n, set_items, set_offsets, winner_pos):
    m = winner_pos.shape[0]
    out = np.zeros(m)
    kmax = 0
    for j in range(m):
        k = set_offsets[j + 1] - set_offsets[j]
        if k > kmax:
            kmax = k
    logits = np.empty(kmax)
    for j in range(m):
        lo = set_offsets[j]
        hi = set_offsets[j + 1]
        k = hi - lo
        mx = -np.inf
        for a in range(k):
            x = set_items[lo + a]
            e = 0.0
            for b in range(k):
                z = set_items[lo + b]
                if z != x:
                    e += u[_pair_slot(x, z, n)]
            logits[a] = e
            if e > mx:
                mx = e
        ssum = 0.0
        for a in range(k):
            ssum += np.exp(logits[a] - mx)
        out[j] = (logits[winner_pos[j]] - mx) - np.log(ssum)
    return out


@njit(cache=True)
def crs_full_nll_grad(u, n, set_items, set_offsets, winner_pos, weights):
    m = winner_pos.shape[0]
    grad = np.zeros(n * (n - 1))
    nll = 0.0
    kmax = 0
    for j in range(m):
        k = set_offsets[j + 1] - set_offsets[j]
        if k > kmax:
            kmax = k
    logits = np.empty(kmax)
    for j in range(m):
        lo = set_offsets[j]
        hi = set_offsets[j + 1]
        k = hi - lo
        mx = -np.inf
        for a in range(k):
            x = set_items[lo + a]
            e = 0.0
            for b in range(k):
                z = set_items[lo + b]
                if z != x:
                    e += u[_pair_slot(x, z, n)]
            logits[a] = e
            if e > mx:
                mx = e
        ssum = 0.0
        for a in range(k):
            ssum += np.exp(logits[a] - mx)
        w = weights[j]
        wp = winner_pos[j]
        nll -= w * ((logits[wp] - mx) - np.log(ssum))
        for a in range(k):
            x = set_items[lo + a]
            r = w * np.exp(logits[a] - mx) / ssum
            if a == wp:
                r -= w
            for b in range(k):
                z = set_items[lo + b]
                if z != x:
                    grad[_pair_slot(x, z, n)] += r
    return nll, grad


@njit(cache=True)
def crs_factor_choice_logprobs(T, C, set_items, set_offsets, winner_pos):
    m = winner_pos.shape[0]
    r = T.shape[1]
    out = np.zeros(m)
    kmax = 0
    for j in range(m):
        k = set_offsets[j + 1] - set_offsets[j]
        if k > kmax:
            kmax = k
    logits = np.empty(kmax)
    csum = np.empty(r)
    for j in range(m):
        lo = set_offsets[j]
        hi = set_offsets[j + 1]
        k = hi - lo
        for d in range(r):
            csum[d] = 0.0
        for b in range(k):
            z = set_items[lo + b]
            for d in range(r):
                csum[d] += C[z, d]
        mx = -np.inf
        for a in range(k):
            x = set_items[lo + a]
            e = 0.0
            for d in range(r):
                e += T[x, d] * (csum[d] - C[x, d])
            logits[a] = e
            if e > mx:
                mx = e
        ssum = 0.0
        for a in range(k):
            ssum += np.exp(logits[a] - mx)
        out[j] = (logits[winner_pos[j]] - mx) - np.log(ssum)
    return out


@njit(cache=True)
def crs_factor_nll_grad(T, C, set_items, set_offsets, winner_pos, weights):
    m = winner_pos.shape[0]
    r = T.shape[1]
    grad_t = np.zeros_like(T)
    grad_c = np.zeros_like(C)
    nll = 0.0
    kmax = 0
    for j in range(m):
        k = set_offsets[j + 1] - set_offsets[j]
        if k > kmax:
            kmax = k
    logits = np.empty(kmax)
    resid = np.empty(kmax)
    csum = np.empty(r)
    srt = np.empty(r)
    for j in range(m):
        lo = set_offsets[j]
        hi = set_offsets[j + 1]
        k = hi - lo
        for d in range(r):
            csum[d] = 0.0
        for b in range(k):
            z = set_items[lo + b]
            for d in range(r):
                csum[d] += C[z, d]
        mx = -np.inf
        for a in range(k):
            x = set_items[lo + a]
            e = 0.0
            for d in range(r):
                e += T[x, d] * (csum[d] - C[x, d])
            logits[a] = e
            if e > mx:
                mx = e
        ssum = 0.0
        for a in range(k):
            ssum += np.exp(logits[a] - mx)
        w = weights[j]
        wp = winner_pos[j]
        nll -= w * ((logits[wp] - mx) - np.log(ssum))
        for d in range(r):
            srt[d] = 0.0
        for a in range(k):
            x = set_items[lo + a]
            rr = w * np.exp(logits[a] - mx) / ssum
            if a == wp:
                rr -= w
            resid[a] = rr
            for d in range(r):
                grad_t[x, d] += rr * (csum[d] - C[x, d])
                srt[d] += rr * T[x, d]
        for a in range(k):
            x = set_items[lo + a]
            for d in range(r):
                grad_c[x, d] += srt[d] - resid[a] * T[x, d]
    return nll, grad_t, grad_c


@njit(cache=True, parallel=True)
def sample_pairwise(theta, U, uniforms):
    count, n_minus_1 = uniforms.shape
    n = n_minus_1 + 1
    out = np.empty((count, n), dtype=np.int64)
    for i in prange(count):
        alive = np.ones(n, dtype=np.bool_)
        prob = np.empty(n)
        expo = np.empty(n)
        for stage in range(n - 1):
            mx = -np.inf
            for y in range(n):
                if alive[y]:
                    e = theta[y]
                    for z in range(n):
                        if alive[z] and z != y:
                            e += U[y, z]
                    expo[y] = e
                    if e > mx:
                        mx = e
            ssum = 0.0
            for y in range(n):
                if alive[y]:
                    prob[y] = np.exp(expo[y] - mx)
                    ssum += prob[y]
            u = uniforms[i, stage]
            cum = 0.0
            winner = -1
            last = -1
            for y in range(n):
                if alive[y]:
                    cum += prob[y] / ssum
                    last = y
                    if cum >= u:
                        winner = y
                        break
            if winner < 0:
                winner = last
            out[i, stage] = winner
            alive[winner] = False
        for y in range(n):
            if alive[y]:
                out[i, n - 1] = y
                break
    return out


@njit(cache=True)
def jacobi_eigvalsh(A, tol=1e-11, max_sweeps=100):
    A = A.copy()
    n = A.shape[0]
    if n == 1:
        return np.diag(A).copy()
    converged = False
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += A[p, q] * A[p, q]
        if np.sqrt(off) <= tol:
            converged = True
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
                for j in range(n):
                    ap = A[p, j]
                    aq = A[q, j]
                    A[p, j] = c * ap - s * aq
                    A[q, j] = s * ap + c * aq
                for j in range(n):
                    ap = A[j, p]
                    aq = A[j, q]
                    A[j, p] = c * ap - s * aq
                    A[j, q] = s * ap + c * aq
    if not converged:
        raise RuntimeError("Jacobi sweep did not converge")
    return np.sort(np.diag(A))
