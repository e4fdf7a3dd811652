"""Real-coordinate reference implementations of the two online learners.

These work on the component-major real vector ``r`` of the qAR coefficients
and never touch quaternion products: predictions use an explicit 4x4
right-multiplication matrix per lag, gradients are the plain real gradient of
the squared loss, and the Newton step uses a dense solve instead of a tracked
inverse.  They exist to cross-check the quaternion-native learners.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .projection import project_balls_pgd


def _right_mult(w):
    """``R`` with ``R @ g == coordinates of g * w``; rows are the product's (a, b, c, d)."""
    a, b, c, d = w
    return np.array(
        [
            [a, -b, -c, -d],
            [b, a, d, -c],
            [c, -d, a, b],
            [d, c, -b, a],
        ]
    )


def design(win) -> np.ndarray:
    """``4 x 4n`` matrix ``X`` with ``X @ r`` the prediction for window ``win``.

    Column ``k * n + i`` holds the derivative of the prediction with respect to
    coordinate ``k`` of coefficient ``i``.
    """
    win = np.asarray(win, dtype=float)
    n = win.shape[0]
    X = np.empty((4, 4 * n))
    for i in range(n):
        X[:, i::n] = _right_mult(win[i])
    return X


def real_gradient(r, win, x_t) -> np.ndarray:
    """Gradient of ``||x_t - X r||^2`` over ``r``."""
    X = design(win)
    e = np.asarray(x_t, dtype=float) - X @ r
    return -2.0 * X.T @ e


def _groups(n: int) -> np.ndarray:
    return np.arange(4)[None, :] * n + np.arange(n)[:, None]


def _clip(r, n: int, c: float) -> np.ndarray:
    r = r.copy()
    for g in _groups(n):
        nrm = np.sqrt(np.sum(r[g] ** 2))
        if nrm > c:
            r[g] *= c / nrm
    return r


def _windows(series, n):
    series = np.asarray(series, dtype=float)
    hist = np.zeros((n, 4))
    for x in series:
        yield hist.copy(), x
        hist = np.roll(hist, 1, axis=0)
        hist[0] = x


def reference_ogd(series, n: int, c: float, H: float = 0.1, eta: Optional[float] = None,
                  eta_max: Optional[float] = None, steps: Optional[int] = None):
    """Real online gradient descent ``r <- clip(r - eta_t grad)``.

    Returns the ``(steps, 4n)`` array of coefficients after each step.
    """
    series = np.asarray(series, dtype=float)[:steps]
    r = np.zeros(4 * n)
    out = np.empty((series.shape[0], 4 * n))
    for t, (win, x) in enumerate(_windows(series, n), start=1):
        if eta is not None:
            rate = eta
        else:
            rate = 1.0 / (H * t)
            if eta_max is not None:
                rate = min(rate, eta_max)
        r = _clip(r - rate * real_gradient(r, win, x), n, c)
        out[t - 1] = r
    return out


def reference_ons(series, n: int, c: float, eta: float, eps: float, steps: Optional[int] = None,
                  tol: float = 1e-13, max_iter: int = 200_000):
    """Real online Newton step.

    ``A <- A + grad grad^T`` from ``A_0 = 4 eps I`` (the real image of
    ``eps I`` on the augmented side), then ``r <- argmin_{y in K} ||y - (r - eta A^{-1} grad)||_A``,
    the projection solved by accelerated projected gradient.
    """
    series = np.asarray(series, dtype=float)[:steps]
    r = np.zeros(4 * n)
    A = 4.0 * eps * np.eye(4 * n)
    groups = _groups(n)
    out = np.empty((series.shape[0], 4 * n))
    for t, (win, x) in enumerate(_windows(series, n)):
        g = real_gradient(r, win, x)
        if np.any(g):
            A = A + np.outer(g, g)
            phi = r - eta * np.linalg.solve(A, g)
            r, _ = project_balls_pgd(A, phi, groups, c, x0=r, tol=tol, max_iter=max_iter)
        out[t] = r
    return out
