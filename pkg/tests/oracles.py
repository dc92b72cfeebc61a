"""Independent reference implementations used as test oracles."""

import itertools

import numpy as np


def triangular_membership(peaks, u):
    """Textbook triangular memberships with saturated outer sets."""
    a = np.asarray(peaks, dtype=float)
    n = len(a)
    mu = np.zeros(n)
    for i in range(n):
        left = a[i - 1] if i > 0 else None
        right = a[i + 1] if i < n - 1 else None
        if left is None and u <= a[i]:
            mu[i] = 1.0
        elif right is None and u >= a[i]:
            mu[i] = 1.0
        elif left is not None and left <= u <= a[i]:
            mu[i] = (u - left) / (a[i] - left)
        elif right is not None and a[i] <= u <= right:
            mu[i] = (right - u) / (right - a[i])
    return mu


def brute_force_tsk(partitions, C, D, u):
    """Sum over every cell of the grid of prod(memberships) * (C + D u)."""
    mus = [triangular_membership(p.peaks, x) for p, x in zip(partitions, u)]
    y = np.zeros(len(u))
    for cell in itertools.product(*(range(len(m)) for m in mus)):
        w = np.prod([m[i] for m, i in zip(mus, cell)])
        if w:
            y += w * (C[cell] + D[cell] @ u)
    return y


def assembled_kriging(theta, Y):
    """Solve the bordered system built with np.block and np.linalg.solve."""
    q, m = theta.shape
    M = np.block([
        [np.eye(q), np.ones((q, 1)), theta],
        [np.ones((1, q)), np.zeros((1, 1)), np.zeros((1, m))],
        [theta.T, np.zeros((m, 1)), np.zeros((m, m))],
    ])
    rhs = np.vstack([Y, np.zeros((1 + m, m))])
    X = np.linalg.solve(M, rhs)
    return X[q], X[q + 1:].T, X[:q]


def affine_lstsq(theta, Y):
    """Least-squares affine fit: returns (C, D) with Y ~ C + theta @ D.T."""
    X = np.column_stack([np.ones(len(theta)), theta])
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return coef[0], coef[1:].T


def monte_carlo_view_factor(emitter, receiver, distance, n, seed):
    """Fraction of diffusely emitted rays from ``emitter`` hitting ``receiver``."""
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = emitter
    px = rng.uniform(x0, x1, n)
    py = rng.uniform(y0, y1, n)
    # cosine-weighted hemisphere
    r1, r2 = rng.random(n), rng.random(n)
    sin_t = np.sqrt(r1)
    cos_t = np.sqrt(1.0 - r1)
    phi = 2.0 * np.pi * r2
    t = distance / cos_t
    hx = px + t * sin_t * np.cos(phi)
    hy = py + t * sin_t * np.sin(phi)
    a0, a1, b0, b1 = receiver
    hit = (hx >= a0) & (hx <= a1) & (hy >= b0) & (hy <= b1)
    return hit.mean()
