"""Rejection-sampling RGO kernels.

Both implementations sample ``exp(-g_y)`` with
``g_y(x) = f(x) + |x - y|^2 / (2 eta)`` row by row: fixed-step gradient
descent (step ``1/M``) to the minimizer ``x*``, then Gaussian proposals
``N(x*, I / beta)`` accepted with probability
``exp(-g_y(z) + g_y(x*) + beta |z - x*|^2 / 2)``.

Proposal ``j`` of row ``i`` reads normals ``j*d .. j*d + d - 1`` and
uniform ``j`` at address ``(particles[i], step)``, so the numba loop and the
numpy active-set loop consume identical random numbers.

Status codes per row: 0 accepted, 1 proposal budget exhausted, 2 optimizer
stalled.
"""

from __future__ import annotations

import numpy as np

from ._backend import njit
from .rng import normal_at, uniform_at
from .targets import KIND_COSINE, KIND_GAUSSIAN

OK = 0
EXHAUSTED = 1
STALLED = 2


@njit
def _f_row(x, kind, param):
    s = 0.0
    if kind == 0:
        for c in range(x.shape[0]):
            s += x[c] * x[c]
        return 0.5 * s / param
    for c in range(x.shape[0]):
        s += 0.5 * x[c] * x[c] + param * np.cos(x[c])
    return s


@njit
def _grad_row(x, kind, param, out):
    if kind == 0:
        for c in range(x.shape[0]):
            out[c] = x[c] / param
    else:
        for c in range(x.shape[0]):
            out[c] = x[c] - param * np.sin(x[c])


@njit
def _g_row(x, y, kind, param, eta):
    s = 0.0
    for c in range(x.shape[0]):
        diff = x[c] - y[c]
        s += diff * diff
    return _f_row(x, kind, param) + 0.5 * s / eta


@njit
def rgo_rejection_numba(ys, particles, step, kind, param, eta, beta, big_m,
                        kp0, kp1, ka0, ka1, opt_tol, max_iter, max_proposals):
    n, d = ys.shape
    out = np.empty((n, d))
    proposals = np.zeros(n, dtype=np.int64)
    iters = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    x = np.empty(d)
    z = np.empty(d)
    grad = np.empty(d)
    inv_sd = 1.0 / np.sqrt(beta)
    for i in range(n):
        y = ys[i]
        for c in range(d):
            x[c] = y[c]
        prev = np.inf
        converged = False
        for it in range(max_iter + 1):
            _grad_row(x, kind, param, grad)
            gn = 0.0
            for c in range(d):
                grad[c] += (x[c] - y[c]) / eta
                gn += grad[c] * grad[c]
            gn = np.sqrt(gn)
            if gn <= opt_tol:
                converged = True
                iters[i] = it
                break
            if gn >= prev or it == max_iter:
                iters[i] = it
                break
            prev = gn
            for c in range(d):
                x[c] -= grad[c] / big_m
        if not converged:
            status[i] = STALLED
            for c in range(d):
                out[i, c] = x[c]
            continue
        g_star = _g_row(x, y, kind, param, eta)
        pid = particles[i]
        accepted = False
        for j in range(max_proposals):
            sq = 0.0
            for c in range(d):
                dz = normal_at(kp0, kp1, pid, step, j * d + c) * inv_sd
                z[c] = x[c] + dz
                sq += dz * dz
            log_acc = -_g_row(z, y, kind, param, eta) + g_star + 0.5 * beta * sq
            u = uniform_at(ka0, ka1, pid, step, j)
            proposals[i] = j + 1
            if u < np.exp(min(log_acc, 0.0)):
                accepted = True
                break
        for c in range(d):
            out[i, c] = z[c]
        if not accepted:
            status[i] = EXHAUSTED
    return out, proposals, iters, status


def rgo_rejection_numpy(ys, particles, step, potential, eta, beta, big_m, rng,
                        tag_prop, tag_acc, opt_tol, max_iter, max_proposals):
    """Vectorized twin of :func:`rgo_rejection_numba` over an active set."""
    n, d = ys.shape
    y = ys
    x = ys.copy()
    iters = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    prev = np.full(n, np.inf)
    active = np.ones(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)
    for it in range(max_iter + 1):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xa = x[idx]
        grad = potential.grad_f(xa) + (xa - y[idx]) / eta
        gn = np.sqrt(np.sum(grad * grad, axis=1))
        done = gn <= opt_tol
        stall = ~done & ((gn >= prev[idx]) | (it == max_iter))
        converged[idx[done]] = True
        finished = done | stall
        iters[idx[finished]] = it
        active[idx[finished]] = False
        move = ~finished
        prev[idx[move]] = gn[move]
        x[idx[move]] = xa[move] - grad[move] / big_m
    status[~converged] = STALLED

    def g(points, centers):
        diff = points - centers
        return potential.f(points) + 0.5 * np.sum(diff * diff, axis=1) / eta

    out = x.copy()
    proposals = np.zeros(n, dtype=np.int64)
    pending = np.flatnonzero(converged)
    g_star = np.empty(n)
    if pending.size:
        g_star[pending] = g(x[pending], y[pending])
    inv_sd = 1.0 / np.sqrt(beta)
    for j in range(max_proposals):
        if pending.size == 0:
            break
        pid = particles[pending]
        dz = rng.normals(tag_prop, pid, step, d, offset=j * d, backend="numpy") * inv_sd
        z = x[pending] + dz
        log_acc = -g(z, y[pending]) + g_star[pending] + 0.5 * beta * np.sum(dz * dz, axis=1)
        u = rng.uniforms(tag_acc, pid, step, 1, offset=j, backend="numpy")[:, 0]
        proposals[pending] = j + 1
        out[pending] = z
        accept = u < np.exp(np.minimum(log_acc, 0.0))
        pending = pending[~accept]
    status[pending] = EXHAUSTED
    return out, proposals, iters, status


SUPPORTED_KINDS = (KIND_GAUSSIAN, KIND_COSINE)
