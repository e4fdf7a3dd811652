"""Projections onto products of Euclidean balls in a weighted norm.

Solves ``min_r (r - phi)^T M (r - phi)`` subject to ``||r[g]|| <= radius`` for
every index group ``g``.  Two solvers are provided: an exact dual Newton
method (the default) and accelerated projected gradient.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigvalsh


class ProjectionNotConverged(RuntimeError):
    pass


def project_balls_euclidean(r, groups, radius):
    """Radial clipping of each group; the Euclidean projection onto the product."""
    r = np.array(r, dtype=float)
    blocks = r[groups]
    norms = np.linalg.norm(blocks, axis=1)
    over = norms > radius
    if np.any(over):
        blocks[over] *= (radius / norms[over])[:, None]
        r[groups] = blocks
    return r


def is_feasible(r, groups, radius, slack=1e-12):
    return bool(np.all(np.linalg.norm(np.asarray(r)[groups], axis=1) <= radius + slack))


def project_balls_newton(M, phi, groups, radius, mu0=None, tol=1e-10, max_iter=200):
    """Exact weighted projection through Newton's method on the Lagrange dual.

    For multipliers ``mu >= 0`` the inner minimiser is
    ``r(mu) = (M + diag(mu))^{-1} M phi``; the dual is concave and smooth, so a
    projected Newton iteration with backtracking converges quadratically.
    Stops when every active constraint holds to ``tol * radius**2`` or when
    the multipliers stop moving at rounding level.

    Returns:
        ``(r, mu, iterations)``.
    """
    phi = np.asarray(phi, dtype=float)
    groups = np.asarray(groups)
    ng, gs = groups.shape
    if is_feasible(phi, groups, radius, slack=0.0):
        return phi.copy(), np.zeros(ng), 0
    Mphi = M @ phi
    r2 = radius * radius

    def inner(mu):
        K = M.copy()
        K[groups, groups] += mu[:, None]
        cf = cho_factor(K, lower=False, check_finite=False)
        r = cho_solve(cf, Mphi, check_finite=False)
        sq = np.sum(r[groups] ** 2, axis=1)
        diff = r - phi
        dual = 0.5 * diff @ M @ diff + 0.5 * mu @ (sq - r2)
        return cf, r, sq, dual

    mu = np.zeros(ng) if mu0 is None else np.maximum(np.asarray(mu0, dtype=float), 0.0)
    cf, r, sq, dual = inner(mu)
    for it in range(1, max_iter + 1):
        grad = 0.5 * (sq - r2)
        viol = np.where(mu > 0, np.abs(grad), np.maximum(grad, 0.0))
        if viol.max() <= tol * r2:
            break
        free = (mu > 0) | (grad > 0)
        idx = np.flatnonzero(free)
        # Hessian of the dual: -R^T K^{-1} R with R holding r restricted to each group
        R = np.zeros((phi.size, idx.size))
        for col, g in enumerate(idx):
            R[groups[g], col] = r[groups[g]]
        KR = cho_solve(cf, R, check_finite=False)
        negH = R.T @ KR
        try:
            step = np.linalg.solve(negH, grad[idx])
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(negH, grad[idx], rcond=None)[0]
        t = 1.0
        for _ in range(60):
            trial = mu.copy()
            trial[idx] = np.maximum(mu[idx] + t * step, 0.0)
            cf_t, r_t, sq_t, dual_t = inner(trial)
            if dual_t >= dual - 1e-15 * max(1.0, abs(dual)):
                break
            t *= 0.5
        else:
            raise ProjectionNotConverged("dual Newton line search failed")
        if np.max(np.abs(trial - mu)) <= 1e-14 * max(1.0, float(mu.max())):
            mu, cf, r, sq, dual = trial, cf_t, r_t, sq_t, dual_t
            break
        mu, cf, r, sq, dual = trial, cf_t, r_t, sq_t, dual_t
    else:
        raise ProjectionNotConverged(f"dual Newton did not converge in {max_iter} iterations")
    # remove residual infeasibility at rounding level
    return project_balls_euclidean(r, groups, radius), mu, it


def project_balls_pgd(M, phi, groups, radius, x0=None, tol=1e-10, max_iter=10_000, restart=True):
    """Accelerated projected gradient with adaptive restart.

    Converged when the iterate moves by less than ``tol`` (relative to the
    radius) in one step.

    Returns:
        ``(r, iterations)``.
    """
    phi = np.asarray(phi, dtype=float)
    if is_feasible(phi, groups, radius, slack=0.0):
        return phi.copy(), 0
    L = float(eigvalsh(M, subset_by_index=[M.shape[0] - 1, M.shape[0] - 1])[0])
    step = 1.0 / L
    x = project_balls_euclidean(phi if x0 is None else x0, groups, radius)
    y = x.copy()
    theta = 1.0
    for it in range(1, max_iter + 1):
        x_new = project_balls_euclidean(y - step * (M @ (y - phi)), groups, radius)
        move = np.linalg.norm(x_new - x)
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        if restart and (y - x_new) @ (x_new - x) > 0:
            theta_new = 1.0
            y = x_new.copy()
        else:
            y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        x, theta = x_new, theta_new
        if move < tol * max(radius, 1.0):
            return x, it
    raise ProjectionNotConverged(f"projected gradient did not converge in {max_iter} iterations")
