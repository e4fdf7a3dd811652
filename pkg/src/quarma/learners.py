"""Online qAR(p+m) learners: quaternion online gradient descent and online Newton step."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .projection import is_feasible, project_balls_newton
from .quat_core import AugmentedVector, assemble, decompose, qnorm
from .quat_linalg import InverseTracker, real_form
from .signal_model import augmented_gradient, ghr_gradient, padded, qar_predict

FEASIBILITY_SLACK = 1e-12
# rounding in A^{-1} u grows with the condition number of A, so the learner
# state gets a looser consistency check than the module-boundary default
STATE_CONSISTENCY_RTOL = 1e-10
# steps between checks of the log-determinant potential bound
POTENTIAL_CHECK_EVERY = 250


@dataclass(frozen=True)
class DecisionSet:
    """``{gamma in H^dim : |gamma_j| <= c}``."""

    c: float
    dim: int

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("decision radius c must be positive")
        if self.dim < 1:
            raise ValueError("decision set dimension must be >= 1")

    def contains(self, gamma) -> bool:
        return bool(np.all(qnorm(gamma) <= self.c + FEASIBILITY_SLACK))

    def real_groups(self) -> np.ndarray:
        """Indices of coefficient ``j``'s four coordinates in component-major real layout."""
        return np.arange(4)[None, :] * self.dim + np.arange(self.dim)[:, None]


@dataclass(frozen=True)
class HyperParams:
    """Constants of the regret analysis plus the tuning knobs derived from them.

    ``G``, ``D`` and ``lam`` left as ``None`` are filled in per run by
    :func:`resolve`; ``eta`` overrides the Newton-step rate and ``ogd_eta``
    replaces the ``1/(H t)`` schedule with a fixed rate, while ``ogd_eta_max``
    caps it, ``eta_t = min(ogd_eta_max, 1/(H t))``, which tames the first few
    hundred steps.  ``eps`` overrides the initial matrix scale ``eta^2 / D^2``.
    """

    c: float = 2.0
    H: float = 0.1
    G: Optional[float] = None
    D: Optional[float] = None
    lam: Optional[float] = None
    eta: Optional[float] = None
    ogd_eta: Optional[float] = None
    ogd_eta_max: Optional[float] = None
    eps: Optional[float] = None
    lambda_max: float = 0.5
    L: float = 1.0
    M_max: float = 1.0
    T: int = 10_000

    def __post_init__(self):
        bad = []
        for name in ("c", "H", "G", "D", "lam", "eta", "ogd_eta", "ogd_eta_max", "eps", "L", "M_max"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                bad.append(f"{name} must be > 0 (got {v})")
        if not 0.0 < self.lambda_max < 1.0:
            bad.append(f"lambda_max must lie in (0, 1) (got {self.lambda_max})")
        if self.T < 1:
            bad.append(f"T must be >= 1 (got {self.T})")
        if bad:
            raise ValueError("; ".join(bad))


def default_diameter(c: float, dim: int) -> float:
    return 4.0 * c * math.sqrt(dim)


def estimate_gradient_bound(series, c: float, dim: int) -> float:
    """Heuristic ``G = 4 (1 + c dim) B^2`` with ``B`` the largest ``|x_t|`` of the run."""
    B = float(qnorm(np.asarray(series)).max(initial=0.0))
    return 4.0 * (1.0 + c * dim) * max(B, 1e-12) ** 2


def resolve(params: HyperParams, series, dim: int) -> HyperParams:
    """Fill in data-dependent defaults for ``G``, ``D`` and ``lam``."""
    D = params.D if params.D is not None else default_diameter(params.c, dim)
    G = params.G if params.G is not None else estimate_gradient_bound(series, params.c, dim)
    lam = params.lam if params.lam is not None else 1.0 / (8.0 * G * D)
    return replace(params, G=G, D=D, lam=lam)


def select_m(h: HyperParams, q_order: int) -> int:
    """Smallest ``m >= 0`` with ``m >= log_{lambda_max}(1 / (T L M_max q))``."""
    if not 0.0 < h.lambda_max < 1.0:
        raise ValueError(f"lambda_max must lie in (0, 1), got {h.lambda_max}")
    if q_order < 1:
        return 0
    prod = h.T * h.L * h.M_max * q_order
    if prod <= 1:
        raise ValueError(f"T * L * M_max * q must exceed 1 (got {prod})")
    bound = math.log(1.0 / prod) / math.log(h.lambda_max)
    # guard against bound landing a rounding error above an integer
    m = math.ceil(bound - 1e-12)
    return max(m, 0)


def ons_rate(G: float, D: float, lam: float) -> float:
    """``eta`` with ``1/eta = min{1/(4 G D), lam} / 2``."""
    if not (G > 0 and D > 0 and lam > 0):
        raise ValueError("G, D and lambda must be positive")
    return 2.0 / min(1.0 / (4.0 * G * D), lam)


def project_K(gamma, dset: DecisionSet) -> np.ndarray:
    """Euclidean projection onto ``K``: radial clipping of each coefficient."""
    gamma = np.array(gamma, dtype=float)
    mods = qnorm(gamma)
    over = mods > dset.c
    if np.any(over):
        gamma[over] *= (dset.c / mods[over])[:, None]
    return gamma


def project_A_norm(phi_aug, A, dset: DecisionSet, warm=None, return_multipliers=False, real_matrix=None):
    """Projection of a flat augmented vector onto the consistent lift of ``K`` in the ``A`` norm.

    Works in real coordinates with ``M = J^H A J``, where the feasible set is a
    product of 4-balls.  ``warm`` is a multiplier vector from a previous call;
    ``A`` may be ``None`` when ``real_matrix`` (a zero-argument callable or
    array giving ``M``) is supplied.
    """
    u = AugmentedVector.from_flat(phi_aug, check=False).check(STATE_CONSISTENCY_RTOL)
    r_phi = decompose(u.blocks[0])
    groups = dset.real_groups()
    if is_feasible(r_phi, groups, dset.c, slack=0.0):
        out = AugmentedVector.from_quat(assemble(r_phi))
        return (out, np.zeros(dset.dim)) if return_multipliers else out
    if real_matrix is None:
        M = real_form(A)
    else:
        M = real_matrix() if callable(real_matrix) else real_matrix
    r, mu, _ = project_balls_newton(M, r_phi, groups, dset.c, mu0=warm)
    out = AugmentedVector.from_quat(assemble(r))
    return (out, mu) if return_multipliers else out


class QogdLearner:
    """qARMA-QOGD state: ``gamma`` and the step counter."""

    name = "qogd"

    def __init__(
        self,
        dset: DecisionSet,
        H: float = 0.1,
        eta: Optional[float] = None,
        gamma0=None,
        eta_max: Optional[float] = None,
    ):
        self.dset = dset
        self.H = H
        self.eta = eta
        self.eta_max = eta_max
        self.gamma = np.zeros((dset.dim, 4)) if gamma0 is None else project_K(gamma0, dset)
        self.t = 0

    def rate(self, t: int) -> float:
        if self.eta is not None:
            return self.eta
        rate = 1.0 / (self.H * t)
        return rate if self.eta_max is None else min(rate, self.eta_max)

    def predict(self, win) -> np.ndarray:
        return qar_predict(self.gamma, win)

    def step(self, win, x_t) -> float:
        self.t += 1
        xhat = qar_predict(self.gamma, win)
        e = np.asarray(x_t, dtype=float) - xhat
        loss = float(e @ e)
        g = ghr_gradient(self.gamma, win, x_t)
        self.gamma = project_K(self.gamma - 4.0 * self.rate(self.t) * g, self.dset)
        return loss


class QonsLearner:
    """qARMA-ONS state: augmented coefficients and the tracked ``A_qt`` and inverse."""

    name = "qons"

    def __init__(self, dset: DecisionSet, eta: float, eps: float, gamma0=None):
        self.dset = dset
        self.eta = eta
        self.eps = eps
        g0 = np.zeros((dset.dim, 4)) if gamma0 is None else project_K(gamma0, dset)
        self.gamma_aug = AugmentedVector.from_quat(g0)
        self.tracker = InverseTracker.scaled_identity(4 * dset.dim, eps)
        # J^H A_qt J, kept alongside the tracker: J^H u = 4 r_g for u = J r_g
        self.real_matrix = 4.0 * eps * np.eye(4 * dset.dim)
        self.t = 0
        self.mu = None
        self.potential_sum = 0.0
        self.potential_gap_min = math.inf

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_aug.blocks[0]

    def predict(self, win) -> np.ndarray:
        return qar_predict(self.gamma, win)

    def step(self, win, x_t) -> float:
        self.t += 1
        gamma = self.gamma
        xhat = qar_predict(gamma, win)
        e = np.asarray(x_t, dtype=float) - xhat
        loss = float(e @ e)
        g = ghr_gradient(gamma, win, x_t)
        if not np.any(g):
            return loss
        u = augmented_gradient(g)
        d = self.tracker.rank1_update(u)  # A_qt^{-1} u
        self.potential_sum += float(np.sum(u * d))
        v = 4.0 * decompose(g)
        self.real_matrix += np.outer(v, v)
        phi = self.gamma_aug.as_flat() - self.eta * d
        self.gamma_aug, self.mu = project_A_norm(
            phi, None, self.dset, warm=self.mu, return_multipliers=True, real_matrix=self.real_matrix
        )
        if self.t % POTENTIAL_CHECK_EVERY == 0:
            self.potential_gap_min = min(self.potential_gap_min, self.potential_gap())
        return loss

    def potential_gap(self) -> float:
        """``(1/2) log(qdet(A_qT) / qdet(A_q0)) - sum_t Re(grad^H A_qt^{-1} grad)`` (nonnegative)."""
        n = self.tracker.dim
        log_a0 = 2.0 * n * math.log(self.eps)
        return 0.5 * (self.tracker.logdet() - log_a0) - self.potential_sum


@dataclass
class Trace:
    """Per-step record of one online run."""

    algo: str
    loss: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, self.loss.size + 1)

    @property
    def avg_mse(self) -> np.ndarray:
        return np.cumsum(self.loss) / self.t

    @property
    def final_avg_mse(self) -> float:
        return float(self.loss.mean())

    def excess(self, floor: float) -> np.ndarray:
        """Average excess loss ``(cumulative loss - t floor) / t``."""
        return self.avg_mse - floor


def ons_constants(params: HyperParams, series, dim: int):
    """``(eta, eps)`` for a Newton-step run: explicit overrides, else the regret-bound defaults."""
    p = resolve(params, series, dim)
    eta = p.eta if p.eta is not None else ons_rate(p.G, p.D, p.lam)
    eps = p.eps if p.eps is not None else eta**2 / p.D**2
    return eta, eps


def make_learner(algo: str, series, params: HyperParams, dset: DecisionSet):
    if algo == "qogd":
        return QogdLearner(dset, H=params.H, eta=params.ogd_eta, eta_max=params.ogd_eta_max)
    if algo == "qons":
        eta, eps = ons_constants(params, series, dset.dim)
        return QonsLearner(dset, eta=eta, eps=eps)
    raise ValueError(f"unknown quaternion algorithm {algo!r}")


def stream(learner, series) -> np.ndarray:
    """Feed ``series`` through ``learner.step`` with zero-padded windows; returns the losses."""
    series = np.asarray(series, dtype=float).reshape(-1, 4)
    n = learner.dset.dim
    xp = padded(series, n)
    losses = np.empty(series.shape[0])
    for s in range(series.shape[0]):
        # xp[s + n - 1] is the sample just before series[s]
        win = xp[s:s + n][::-1]
        losses[s] = learner.step(win, series[s])
    return losses


def run_learner(algo: str, series, params: HyperParams, dset: DecisionSet) -> Trace:
    """Run ``"qogd"`` or ``"qons"`` from ``gamma_1 = 0`` over the whole series."""
    series = np.asarray(series, dtype=float).reshape(-1, 4)
    if series.shape[0] < 1:
        raise ValueError("series must contain at least one sample")
    learner = make_learner(algo, series, params, dset)
    losses = stream(learner, series)
    diag = {"gamma": learner.gamma.copy()}
    if isinstance(learner, QonsLearner):
        diag.update(
            eta=learner.eta,
            eps=learner.eps,
            potential_sum=learner.potential_sum,
            potential_gap=learner.potential_gap(),
            potential_gap_min=min(learner.potential_gap_min, learner.potential_gap()),
            tracker_residual=learner.tracker.residual(),
        )
    return Trace(algo, losses, diag)


TRACE_COLUMNS = ["run", "algo", "t", "loss", "avg_mse"]


def write_traces_csv(path, traces) -> Path:
    """``traces`` is an iterable of ``(run_index, Trace)`` pairs."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for run, tr in traces:
            for t, loss, avg in zip(tr.t, tr.loss, tr.avg_mse):
                w.writerow([run, tr.algo, int(t), repr(float(loss)), repr(float(avg))])
    return path


def read_traces_csv(path):
    """Returns ``{(run, algo): Trace}``."""
    rows = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRACE_COLUMNS:
            raise ValueError(f"{path}: expected columns {TRACE_COLUMNS}, got {reader.fieldnames}")
        for rec in reader:
            rows.setdefault((int(rec["run"]), rec["algo"]), []).append(float(rec["loss"]))
    return {k: Trace(k[1], np.array(v)) for k, v in rows.items()}
