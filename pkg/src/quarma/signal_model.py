"""qARMA signal generation, qAR prediction, squared loss and its GHR gradient.

Time indexing: ``series[s]`` holds ``x_{s+1}``.  The prediction window for
the sample at 0-based index ``s`` is ``x_{s}, x_{s-1}, ...`` (most recent
first), zero-padded before the start of the series.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .quat_core import AugmentedVector, Quaternion, left_matrix, qabs2, qconj, qmul, qnorm

DIVERGENCE_LIMIT = 1e6
DEFAULT_BURN_IN = 500


class GeneratorDivergence(RuntimeError):
    """The generated path left the ball of radius ``DIVERGENCE_LIMIT``."""


def _as_quat_array(values, length=None, name="coefficients") -> np.ndarray:
    rows = []
    for v in values:
        if isinstance(v, Quaternion):
            rows.append(v.as_array())
        elif isinstance(v, str):
            rows.append(Quaternion.parse(v).as_array())
        else:
            rows.append(np.asarray(v, dtype=float).reshape(4))
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name}: expected {length} quaternions, got {arr.shape[0]}")
    return arr


@dataclass(frozen=True)
class QarmaSpec:
    """Generating qARMA(p, q) model; ``alpha`` and ``beta`` are ``(p, 4)``/``(q, 4)`` arrays."""

    alpha: np.ndarray
    beta: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_quat_array(self.alpha, name="alpha"))
        object.__setattr__(self, "beta", _as_quat_array(self.beta, name="beta"))
        if self.p < 1:
            raise ValueError("qARMA needs p >= 1")

    @property
    def p(self) -> int:
        return self.alpha.shape[0]

    @property
    def q(self) -> int:
        return self.beta.shape[0]

    def max_alpha_modulus(self) -> float:
        return float(qnorm(self.alpha).max())

    def check_radius(self, c: float) -> None:
        """Require every ``|alpha_i| <= c``."""
        worst = self.max_alpha_modulus()
        if worst > c + 1e-12:
            raise ValueError(f"|alpha_i| = {worst:.4g} exceeds the decision radius c = {c:g}")


@dataclass(frozen=True)
class NoiseSpec:
    """I.i.d. quaternion noise with four independent real components.

    ``law`` is ``"gaussian"`` (``scale`` = per-component std-dev) or
    ``"uniform"`` (``scale`` = per-component half width).
    """

    law: str = "gaussian"
    scale: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.law not in ("gaussian", "uniform"):
            raise ValueError(f"unknown noise law {self.law!r}")
        if self.scale < 0:
            raise ValueError("noise scale must be nonnegative")

    @property
    def second_moment(self) -> float:
        """``E|eps|^2``."""
        if self.law == "gaussian":
            return 4.0 * self.scale**2
        return 4.0 * self.scale**2 / 3.0

    def with_seed(self, seed: int) -> "NoiseSpec":
        return NoiseSpec(self.law, self.scale, seed)

    def draw(self, n: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        rng = np.random.default_rng(self.seed) if rng is None else rng
        if self.law == "gaussian":
            return rng.normal(0.0, self.scale, size=(n, 4))
        return rng.uniform(-self.scale, self.scale, size=(n, 4))


def generate_qarma(spec: QarmaSpec, noise: NoiseSpec, T: int, burn_in: int = DEFAULT_BURN_IN):
    """Simulate ``x_t = sum alpha_i x_{t-i} + sum beta_i eps_{t-i} + eps_t``.

    Coefficients multiply from the left.  The first ``burn_in`` samples are
    generated from a zero initial state and discarded.

    Returns:
        ``(series, noises)``, both ``(T, 4)`` arrays.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    n = T + burn_in
    eps = noise.draw(n)
    drive = eps.copy()
    for i in range(1, spec.q + 1):
        drive[i:] += qmul(spec.beta[i - 1], eps[:-i])

    p = spec.p
    # stacked [L(alpha_1) ... L(alpha_p)] acting on [x_{t-1}; ...; x_{t-p}]
    ar = np.hstack([left_matrix(a) for a in spec.alpha])
    hist = np.zeros(4 * p)
    x = np.empty((n, 4))
    for t in range(n):
        xt = ar @ hist + drive[t]
        if not np.all(np.abs(xt) <= DIVERGENCE_LIMIT):
            raise GeneratorDivergence(
                f"sample {t} has modulus {np.linalg.norm(xt):.3e}; the qARMA model is unstable"
            )
        x[t] = xt
        hist[4:] = hist[:-4]
        hist[:4] = xt
    return x[burn_in:].copy(), eps[burn_in:].copy()


def ma_lambda_max(beta) -> float:
    """Largest root modulus of ``y_t = sum |beta_i| y_{t-i}``.

    Values below 1 mean the moving-average moduli give a stationary difference
    equation; this also sets the truncation rate used by :func:`learners.select_m`.
    """
    mods = qnorm(_as_quat_array(beta))
    if mods.size == 0:
        return 0.0
    roots = np.roots(np.concatenate([[1.0], -mods]))
    return float(np.max(np.abs(roots)))


def ma_inverse_radius(beta) -> float:
    """Spectral radius of the recursion ``e_t = -sum beta_i e_{t-i}``.

    This recursion carries the error of the truncated predictor
    :func:`truncated_qar_series` from one truncation level to the next, and it
    is the noise-recovery filter of the model.  Below 1 the model is
    invertible and the truncated predictor converges to ``x_t - eps_t``; above
    1 the truncation error grows with ``m``.
    """
    beta = _as_quat_array(beta)
    q = beta.shape[0]
    if q == 0:
        return 0.0
    C = np.zeros((4 * q, 4 * q))
    C[:4, :] = np.hstack([left_matrix(-b) for b in beta])
    C[4:, :-4] = np.eye(4 * (q - 1))
    return float(np.max(np.abs(np.linalg.eigvals(C))))


def padded(series, n: int) -> np.ndarray:
    """Series with ``n`` leading zero samples, so windows are plain slices."""
    series = np.asarray(series, dtype=float).reshape(-1, 4)
    return np.vstack([np.zeros((n, 4)), series])


def window(series, s: int, n: int) -> np.ndarray:
    """``(n, 4)`` history ``x_{s}, x_{s-1}, ..., `` before 0-based sample ``s``, most recent first."""
    series = np.asarray(series, dtype=float).reshape(-1, 4)
    if not 0 <= s <= series.shape[0]:
        raise IndexError(f"sample index {s} outside series of length {series.shape[0]}")
    out = np.zeros((n, 4))
    k = min(n, s)
    if k:
        out[:k] = series[s - k:s][::-1]
    return out


def qar_predict(gamma, win) -> np.ndarray:
    """``sum_i gamma_i x_{t-i}`` with the coefficient on the left."""
    gamma = np.asarray(gamma, dtype=float)
    win = np.asarray(win, dtype=float)
    if gamma.shape != win.shape:
        raise ValueError(f"coefficient shape {gamma.shape} does not match window shape {win.shape}")
    return qmul(gamma, win).sum(axis=0)


def squared_loss(x, xhat) -> float:
    return float(qabs2(np.asarray(x, dtype=float) - np.asarray(xhat, dtype=float)))


def ghr_gradient(gamma, win, x_t) -> np.ndarray:
    """Conjugate GHR gradient of ``|x_t - sum gamma_i x_{t-i}|^2``.

    Component ``i`` is ``-(1/2) e conj(x_{t-i})`` with ``e`` the prediction
    error; one quarter of ``J`` times the real-coordinate gradient, block 0.
    """
    e = np.asarray(x_t, dtype=float) - qar_predict(gamma, win)
    return -0.5 * qmul(e, qconj(win))


def augmented_gradient(g) -> np.ndarray:
    """Flat ``(4n, 4)`` augmented gradient ``[g; g^i; g^j; g^k]``."""
    return AugmentedVector.from_quat(g).as_flat()


def truncated_qar_series(spec: QarmaSpec, series, m: int) -> np.ndarray:
    """``x_t^m`` for every ``t`` of ``series`` (``(T, 4)`` array).

    Recursion ``x_t^m = sum alpha_i x_{t-i} + sum beta_i (x_{t-i} - x_{t-i}^{m-i})``
    with ``x_t^k = x_t`` for ``k <= 0``; pre-sample values are zero.
    """
    x = np.asarray(series, dtype=float).reshape(-1, 4)
    T = x.shape[0]
    p, q = spec.p, spec.q
    lag = max(p, q)
    xp = padded(x, lag)
    ar_part = np.zeros((T, 4))
    for i in range(1, p + 1):
        ar_part += qmul(spec.alpha[i - 1], xp[lag - i:lag - i + T])
    if m <= 0:
        return x.copy()
    levels = {}  # k -> padded x^k for k in [m - q, m]; x^k = x for k <= 0

    def level(k):
        if k <= 0:
            return xp
        if k not in levels:
            cur = ar_part.copy()
            for i in range(1, q + 1):
                prev = level(k - i)
                cur += qmul(spec.beta[i - 1], xp[lag - i:lag - i + T] - prev[lag - i:lag - i + T])
            levels[k] = np.vstack([np.zeros((lag, 4)), cur])
        return levels[k]

    return level(m)[lag:].copy()


def truncated_qar_predict(spec: QarmaSpec, series, t: int, m: int) -> np.ndarray:
    """``x_t^m`` at 1-based time ``t``, memoised over ``(t, m)``."""
    x = np.asarray(series, dtype=float).reshape(-1, 4)
    if not 1 <= t <= x.shape[0]:
        raise IndexError(f"t = {t} outside 1..{x.shape[0]}")
    memo = {}

    def obs(s):
        return x[s - 1] if s >= 1 else np.zeros(4)

    def rec(s, k):
        if s < 1:
            return np.zeros(4)
        if k <= 0:
            return x[s - 1]
        key = (s, k)
        if key in memo:
            return memo[key]
        val = np.zeros(4)
        for i in range(1, spec.p + 1):
            val = val + qmul(spec.alpha[i - 1], obs(s - i))
        for i in range(1, spec.q + 1):
            val = val + qmul(spec.beta[i - 1], obs(s - i) - rec(s - i, k - i))
        memo[key] = val
        return val

    return rec(t, m).copy()


SERIES_COLUMNS = ["t", "x_a", "x_b", "x_c", "x_d"]
NOISE_COLUMNS = ["eps_a", "eps_b", "eps_c", "eps_d"]


def write_series_csv(path, series, noises=None) -> Path:
    path = Path(path)
    series = np.asarray(series, dtype=float).reshape(-1, 4)
    header = SERIES_COLUMNS + (NOISE_COLUMNS if noises is not None else [])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s, row in enumerate(series):
            out = [s + 1] + [repr(float(v)) for v in row]
            if noises is not None:
                out += [repr(float(v)) for v in noises[s]]
            w.writerow(out)
    return path


def read_series_csv(path):
    """Read a series CSV; returns ``(series, noises_or_None)``."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:5] != SERIES_COLUMNS:
            raise ValueError(f"{path}: expected leading columns {SERIES_COLUMNS}, got {header}")
        has_eps = header[5:9] == NOISE_COLUMNS
        rows = [[float(v) for v in r] for r in reader if r]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    series = data[:, 1:5].copy()
    noises = data[:, 5:9].copy() if has_eps else None
    return series, noises
