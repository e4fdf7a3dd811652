"""Real-valued comparison learners: component-wise scalar AR and multichannel vector AR.

Both reuse the quaternion learners' rate settings.  The gradient-descent
variants follow the same ``eta_t`` schedule on the real gradient, and the
Newton variants start from ``4 eps I``, the real image of the quaternion
``eps I``.  With those choices a component-wise run on a purely real series
coincides with the quaternion run.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .learners import HyperParams, Trace, ons_constants
from .projection import project_balls_euclidean, project_balls_newton
from .quat_core import left_matrix

REFRESH_EVERY = 512


class RealLinearLearner:
    """Online OGD or ONS for ``y ~ X theta`` with ``theta`` confined to a product of balls.

    ``groups`` is an ``(n_groups, group_size)`` index array; each group is kept
    inside the Euclidean ball of ``radius`` (or the ``A``-norm projection of it
    for the Newton variant).
    """

    def __init__(self, variant: str, dim: int, groups, radius: float, params: HyperParams,
                 eta: Optional[float] = None, eps: Optional[float] = None):
        if variant not in ("ogd", "ons"):
            raise ValueError(f"variant must be 'ogd' or 'ons', got {variant!r}")
        self.variant = variant
        self.groups = np.asarray(groups)
        self.radius = radius
        self.theta = np.zeros(dim)
        self.t = 0
        self.params = params
        if variant == "ons":
            if eta is None or eps is None:
                raise ValueError("the Newton variant needs eta and eps")
            self.eta = eta
            self.A = 4.0 * eps * np.eye(dim)
            self.Ainv = np.eye(dim) / (4.0 * eps)
            self.mu = None
            self._updates = 0

    def rate(self, t: int) -> float:
        p = self.params
        if p.ogd_eta is not None:
            return p.ogd_eta
        r = 1.0 / (p.H * t)
        return r if p.ogd_eta_max is None else min(r, p.ogd_eta_max)

    def step(self, X, y) -> float:
        self.t += 1
        e = y - X @ self.theta
        loss = float(e @ e)
        g = -2.0 * X.T @ e
        if self.variant == "ogd":
            self.theta = project_balls_euclidean(self.theta - self.rate(self.t) * g, self.groups, self.radius)
            return loss
        if not np.any(g):
            return loss
        w = self.Ainv @ g
        self.A += np.outer(g, g)
        self._updates += 1
        if self._updates % REFRESH_EVERY == 0:
            self.Ainv = np.linalg.inv(self.A)
            d = self.Ainv @ g
        else:
            denom = 1.0 + g @ w
            self.Ainv -= np.outer(w, w) / denom
            d = w / denom
        phi = self.theta - self.eta * d
        self.theta, self.mu, _ = project_balls_newton(self.A, phi, self.groups, self.radius, mu0=self.mu)
        return loss


def _check_series(series) -> np.ndarray:
    series = np.asarray(series, dtype=float).reshape(-1, 4)
    if series.shape[0] < 1:
        raise ValueError("series must contain at least one sample")
    return series


def _windows(series, n):
    xp = np.vstack([np.zeros((n, 4)), series])
    for s in range(series.shape[0]):
        yield xp[s:s + n][::-1], series[s]


def run_componentwise(variant: str, series, params: HyperParams, dim: int) -> Trace:
    """Four independent real AR(``dim``) learners, one per quaternion coordinate.

    Each coefficient is boxed to ``|theta| <= c``.  The recorded loss is the
    sum of the four squared coordinate errors.
    """
    series = _check_series(series)
    eta = eps = None
    if variant == "ons":
        eta, eps = ons_constants(params, series, dim)
    groups = np.arange(dim)[:, None]
    learners = [RealLinearLearner(variant, dim, groups, params.c, params, eta, eps) for _ in range(4)]
    losses = np.empty(series.shape[0])
    for s, (win, x) in enumerate(_windows(series, dim)):
        losses[s] = sum(lrn.step(win[None, :, k], x[k:k + 1]) for k, lrn in enumerate(learners))
    theta = np.stack([lrn.theta for lrn in learners])
    return Trace(f"cw_{variant}", losses, {"theta": theta})


def multichannel_groups(dim: int) -> np.ndarray:
    """Indices of matrix ``M_i`` inside the row-major flattening of ``[M_1 ... M_dim]``."""
    rows = np.arange(4)[:, None] * (4 * dim)
    cols = np.arange(4)[None, :]
    return np.stack([(rows + 4 * i + cols).reshape(-1) for i in range(dim)])


def stack_matrices(theta, dim: int) -> np.ndarray:
    """``(dim, 4, 4)`` view of a flat multichannel parameter."""
    return np.asarray(theta).reshape(4, dim, 4).transpose(1, 0, 2)


def flatten_matrices(mats) -> np.ndarray:
    mats = np.asarray(mats, dtype=float)
    return mats.transpose(1, 0, 2).reshape(-1)


def embed_quaternion_coefficients(gamma) -> np.ndarray:
    """Flat multichannel parameter whose ``M_i`` is the left-multiplication matrix of ``gamma_i``."""
    return flatten_matrices(np.stack([left_matrix(g) for g in np.asarray(gamma, dtype=float)]))


def multichannel_predict(theta, win) -> np.ndarray:
    """``sum_i M_i x_{t-i}`` as a real 4-vector."""
    win = np.asarray(win, dtype=float)
    return np.einsum("iab,ib->a", stack_matrices(theta, win.shape[0]), win)


def run_multichannel(variant: str, series, params: HyperParams, dim: int) -> Trace:
    """Vector AR(``dim``) with one real ``4 x 4`` matrix per lag.

    Each matrix is held inside a Frobenius ball of radius ``2c``, the
    Frobenius norm of the left-multiplication matrix of a modulus-``c``
    quaternion.
    """
    series = _check_series(series)
    eta = eps = None
    if variant == "ons":
        eta, eps = ons_constants(params, series, dim)
    lrn = RealLinearLearner(variant, 16 * dim, multichannel_groups(dim), 2.0 * params.c, params, eta, eps)
    eye4 = np.eye(4)
    losses = np.empty(series.shape[0])
    for s, (win, x) in enumerate(_windows(series, dim)):
        losses[s] = lrn.step(np.kron(eye4, win.reshape(1, -1)), x)
    return Trace(f"mc_{variant}", losses, {"matrices": stack_matrices(lrn.theta, dim)})


BASELINES = {
    "cw_ogd": lambda s, p, d: run_componentwise("ogd", s, p, d),
    "cw_ons": lambda s, p, d: run_componentwise("ons", s, p, d),
    "mc_ogd": lambda s, p, d: run_multichannel("ogd", s, p, d),
    "mc_ons": lambda s, p, d: run_multichannel("ons", s, p, d),
}
