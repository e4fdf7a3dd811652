"""Quaternion matrix algebra for the online Newton step.

Quaternion matrices are ``(n, m, 4)`` float arrays.  Products are computed
componentwise with sixteen real matrix products, which keeps the Hamilton
ordering explicit while staying vectorised.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .quat_core import j_matrix, qconj, qmul

BREAKDOWN_TOL = 1e-14
REFRESH_EVERY = 512


class TrackerBreakdown(FloatingPointError):
    """Sherman-Morrison denominator lost positivity (corrupted state)."""


def identity(n: int, scale: float = 1.0) -> np.ndarray:
    out = np.zeros((n, n, 4))
    out[np.arange(n), np.arange(n), 0] = scale
    return out


def qmatmul(A, B):
    """Quaternion matrix product ``A @ B`` for ``(n, m, 4)`` and ``(m, p, 4)`` arrays."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape[:2]} @ {B.shape[:2]}")
    a1, b1, c1, d1 = A[..., 0], A[..., 1], A[..., 2], A[..., 3]
    a2, b2, c2, d2 = B[..., 0], B[..., 1], B[..., 2], B[..., 3]
    return np.stack(
        [
            a1 @ a2 - b1 @ b2 - c1 @ c2 - d1 @ d2,
            a1 @ b2 + b1 @ a2 + c1 @ d2 - d1 @ c2,
            a1 @ c2 - b1 @ d2 + c1 @ a2 + d1 @ b2,
            a1 @ d2 + b1 @ c2 - c1 @ b2 + d1 @ a2,
        ],
        axis=-1,
    )


def matvec(A, v):
    """``A v`` for a quaternion matrix and an ``(m, 4)`` quaternion vector."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[1] != 4:
        raise ValueError(f"expected an (m, 4) quaternion vector, got shape {v.shape}")
    return qmatmul(A, v[:, None, :])[:, 0, :]


def hermitian_transpose(A):
    return np.swapaxes(qconj(A), 0, 1)


def outer(u, v):
    """``u v^H`` with entries ``u_i conj(v_j)``."""
    return qmul(np.asarray(u)[:, None, :], qconj(v)[None, :, :])


def hermitian_error(A) -> float:
    """Max-abs deviation of ``A`` from ``A^H``."""
    return float(np.max(np.abs(A - hermitian_transpose(A)), initial=0.0))


def is_hermitian(A, atol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    return hermitian_error(A) <= atol * scale


def complex_adjoint(A) -> np.ndarray:
    """``2n x 2n`` complex representation; ``z1 + z2 j`` maps to ``[[z1, z2], [-conj(z2), conj(z1)]]``."""
    A = np.asarray(A, dtype=float)
    n, m = A.shape[:2]
    z1 = A[..., 0] + 1j * A[..., 1]
    z2 = A[..., 2] + 1j * A[..., 3]
    out = np.empty((2 * n, 2 * m), dtype=complex)
    out[0::2, 0::2] = z1
    out[0::2, 1::2] = z2
    out[1::2, 0::2] = -np.conj(z2)
    out[1::2, 1::2] = np.conj(z1)
    return out


def from_complex_adjoint(C) -> np.ndarray:
    """Inverse of :func:`complex_adjoint` (reads the first row of each 2x2 block)."""
    C = np.asarray(C)
    z1 = C[0::2, 0::2]
    z2 = C[0::2, 1::2]
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


def qinv(A) -> np.ndarray:
    return from_complex_adjoint(np.linalg.inv(complex_adjoint(A)))


def qsolve(A, b) -> np.ndarray:
    """Solve ``A x = b`` for a quaternion vector ``b`` through the complex adjoint."""
    rhs = complex_adjoint(np.asarray(b, dtype=float)[:, None, :])
    x = np.linalg.solve(complex_adjoint(A), rhs)
    return from_complex_adjoint(x)[:, 0, :]


def qlogdet(A) -> float:
    """Natural log of the q-determinant, accumulated through an LU factorisation."""
    sign, logdet = np.linalg.slogdet(complex_adjoint(A))
    if abs(sign) == 0:
        return -np.inf
    return float(logdet)


def qdet(A) -> float:
    """q-determinant ``det(complex_adjoint(A))``: real, nonnegative, ``prod |lambda_i|^2``."""
    d = np.linalg.det(complex_adjoint(A))
    return float(max(d.real, 0.0))


@lru_cache(maxsize=16)
def _j_adjoint(n: int) -> np.ndarray:
    Jc = complex_adjoint(j_matrix(n))
    Jc.setflags(write=False)
    return Jc


def real_form(A) -> np.ndarray:
    """Real symmetric matrix ``J^H A J`` for a Hermitian ``4n x 4n`` quaternion matrix.

    This is the matrix of the quadratic form ``u^H A u`` restricted to
    augmented vectors ``u = J r``, expressed in the real coordinates ``r``.
    """
    A = np.asarray(A, dtype=float)
    return real_form_from_adjoint(complex_adjoint(A))


def real_form_from_adjoint(Ac) -> np.ndarray:
    """:func:`real_form` for a matrix given by its complex adjoint."""
    if Ac.shape[0] % 8:
        raise ValueError("augmented matrices have dimension divisible by 4")
    Jc = _j_adjoint(Ac.shape[0] // 8)
    Mc = Jc.conj().T @ Ac @ Jc
    # the adjoint of a real matrix carries it on both diagonals of every 2x2 block
    M = Mc[0::2, 0::2].real
    return 0.5 * (M + M.T)


class InverseTracker:
    """Hermitian positive-definite quaternion matrix with its inverse kept in step.

    Rank-1 updates ``A <- A + u u^H`` refresh the inverse with the
    Sherman-Morrison formula; every ``refresh_every`` updates the inverse is
    recomputed from the complex adjoint to stop rounding drift.  Both matrices
    are held as complex adjoints, where a quaternion rank-1 term becomes a
    complex rank-2 term.  Single owner, mutated in place.
    """

    def __init__(self, matrix, inverse=None, refresh_every: int = REFRESH_EVERY):
        self._A = complex_adjoint(matrix)
        self._Ainv = np.linalg.inv(self._A) if inverse is None else complex_adjoint(inverse)
        self.refresh_every = refresh_every
        self.update_count = 0

    @classmethod
    def scaled_identity(cls, n: int, scale: float, **kw) -> "InverseTracker":
        if scale <= 0:
            raise ValueError("initial matrix scale must be positive")
        return cls(identity(n, scale), identity(n, 1.0 / scale), **kw)

    @property
    def dim(self) -> int:
        return self._A.shape[0] // 2

    @property
    def matrix(self) -> np.ndarray:
        return from_complex_adjoint(self._A)

    @property
    def inverse(self) -> np.ndarray:
        return from_complex_adjoint(self._Ainv)

    @property
    def matrix_adjoint(self) -> np.ndarray:
        return self._A

    def copy(self) -> "InverseTracker":
        out = InverseTracker.__new__(InverseTracker)
        out._A = self._A.copy()
        out._Ainv = self._Ainv.copy()
        out.refresh_every = self.refresh_every
        out.update_count = self.update_count
        return out

    def rank1_update(self, u) -> np.ndarray:
        """Apply ``A <- A + u u^H`` and return the new ``A^{-1} u``."""
        U = complex_adjoint(np.asarray(u, dtype=float)[:, None, :])  # (2n, 2)
        W = self._Ainv @ U
        # real part of u^H A^{-1} u sits in the (0, 0) entry of U^H W
        denom = 1.0 + float(np.vdot(U[:, 0], W[:, 0]).real)
        if not denom > BREAKDOWN_TOL:
            raise TrackerBreakdown(f"Sherman-Morrison denominator {denom:.3e} is not positive")
        self._A += U @ U.conj().T
        self.update_count += 1
        if self.update_count % self.refresh_every == 0:
            self.refresh()
            W = self._Ainv @ U
        else:
            self._Ainv -= (W @ W.conj().T) / denom
            W = W / denom
        return from_complex_adjoint(W)[:, 0, :]

    def refresh(self) -> None:
        self._A = 0.5 * (self._A + self._A.conj().T)
        inv = np.linalg.inv(self._A)
        self._Ainv = 0.5 * (inv + inv.conj().T)

    def logdet(self) -> float:
        """Log q-determinant of the tracked matrix."""
        sign, val = np.linalg.slogdet(self._A)
        return float(val) if abs(sign) else -np.inf

    def residual(self) -> float:
        """Frobenius norm of ``A A^{-1} - I`` (quaternion entries)."""
        P = self._A @ self._Ainv - np.eye(self._A.shape[0])
        # each quaternion entry occupies two rows of its 2x2 block
        return float(np.sqrt(0.5) * np.linalg.norm(P))


def rank1_update(tracker: InverseTracker, u) -> InverseTracker:
    tracker.rank1_update(u)
    return tracker
