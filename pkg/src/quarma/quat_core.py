"""Quaternion arithmetic, involutions and the augmented/real coordinate maps.

Quaternion arrays are stored with the four real coordinates on the last axis,
in (a, b, c, d) order for ``a + b i + c j + d k``.  A length-``n`` quaternion
vector is therefore an ``(n, 4)`` float array.

The real coordinate vector ``r`` of a quaternion vector ``q`` is laid out
component-major, ``[q_a; q_b; q_c; q_d]`` (length ``4n``), and the augmented
vector stacks ``[q; q^i; q^j; q^k]``.  The two are related by ``u = J r``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

AXES = ("i", "j", "k")

# sign applied to (a, b, c, d) by each involution q^mu = -mu q mu
_INVOLUTION_SIGNS = {
    "i": np.array([1.0, 1.0, -1.0, -1.0]),
    "j": np.array([1.0, -1.0, 1.0, -1.0]),
    "k": np.array([1.0, -1.0, -1.0, 1.0]),
}
_CONJ_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])

# Row s of J (block row) is [1, s_i i, s_j j, s_k k]; column b multiplies q_b.
# _J_SIGNS[row, col] is the sign of the unit in block (row, col).
_J_SIGNS = np.array(
    [
        [1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, 1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
    ]
)

CONSISTENCY_RTOL = 1e-12


class InconsistentAugmentedVector(ValueError):
    """Raised when augmented blocks are not the involutions of block 0."""


def qmul(p, q):
    """Hamilton product of quaternion arrays, broadcasting over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    lead = np.broadcast_shapes(p.shape[:-1], q.shape[:-1])
    pairs = p[..., :, None] * q[..., None, :]
    return pairs.reshape(lead + (16,)) @ _TABLE16


def qconj(q):
    return np.asarray(q, dtype=float) * _CONJ_SIGNS


def qinvolution(q, axis: str):
    """Involution ``q^axis = -axis * q * axis``; flips the two other imaginary parts."""
    try:
        signs = _INVOLUTION_SIGNS[axis]
    except KeyError:
        raise ValueError(f"involution axis must be one of {AXES}, got {axis!r}") from None
    return np.asarray(q, dtype=float) * signs


def qabs2(q):
    q = np.asarray(q, dtype=float)
    return np.sum(q * q, axis=-1)


def qnorm(q):
    return np.sqrt(qabs2(q))


def left_matrix(q):
    """Real 4x4 matrix ``L`` with ``L(q) @ w == qmul(q, w)``."""
    a, b, c, d = np.asarray(q, dtype=float)
    return np.array(
        [
            [a, -b, -c, -d],
            [b, a, -d, c],
            [c, d, a, -b],
            [d, -c, b, a],
        ]
    )


# _TABLE16[4 a + b] = e_a e_b for the basis (1, i, j, k)
_TABLE16 = np.stack([left_matrix(row).T for row in np.eye(4)]).reshape(16, 4)


def right_matrix(q):
    """Real 4x4 matrix ``R`` with ``R(q) @ w == qmul(w, q)``."""
    a, b, c, d = np.asarray(q, dtype=float)
    return np.array(
        [
            [a, -b, -c, -d],
            [b, a, d, -c],
            [c, -d, a, b],
            [d, c, -b, a],
        ]
    )


@dataclass(frozen=True)
class Quaternion:
    """Scalar quaternion value ``a + b i + c j + d k``."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        a, b, c, d = (float(x) for x in np.asarray(arr, dtype=float).reshape(4))
        return cls(a, b, c, d)

    @classmethod
    def parse(cls, text: str) -> "Quaternion":
        """Parse the ``"a,b,c,d"`` form used in config files."""
        parts = [s.strip() for s in str(text).split(",")]
        if len(parts) != 4:
            raise ValueError(f"quaternion literal needs 4 comma-separated reals, got {text!r}")
        return cls(*(float(s) for s in parts))

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=float)

    def __iter__(self):
        return iter((self.a, self.b, self.c, self.d))

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion.from_array(qmul(self.as_array(), other.as_array()))
        if np.isscalar(other):
            return Quaternion.from_array(self.as_array() * float(other))
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return Quaternion.from_array(self.as_array() * float(other))
        return NotImplemented

    def __add__(self, other):
        other = _coerce(other)
        return Quaternion.from_array(self.as_array() + other.as_array())

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return Quaternion.from_array(self.as_array() - other.as_array())

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return Quaternion(-self.a, -self.b, -self.c, -self.d)

    def conj(self) -> "Quaternion":
        return Quaternion(self.a, -self.b, -self.c, -self.d)

    def involution(self, axis: str) -> "Quaternion":
        return Quaternion.from_array(qinvolution(self.as_array(), axis))

    def norm(self) -> float:
        return float(np.sqrt(self.a**2 + self.b**2 + self.c**2 + self.d**2))

    def isclose(self, other, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.as_array(), _coerce(other).as_array(), rtol=0, atol=atol))

    def __str__(self):
        return f"{self.a:g}{self.b:+g}i{self.c:+g}j{self.d:+g}k"


def _coerce(x) -> Quaternion:
    if isinstance(x, Quaternion):
        return x
    if np.isscalar(x):
        return Quaternion(float(x))
    return Quaternion.from_array(x)


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def mul(p, q) -> Quaternion:
    return _coerce(p) * _coerce(q)


def conj(q) -> Quaternion:
    return _coerce(q).conj()


def involution(q, axis: str) -> Quaternion:
    return _coerce(q).involution(axis)


def quat_vector(entries: Iterable[Union[Quaternion, Iterable[float]]]) -> np.ndarray:
    """Build an ``(n, 4)`` quaternion vector from quaternions or 4-tuples."""
    rows = [_coerce(e).as_array() for e in entries]
    if not rows:
        return np.zeros((0, 4))
    return np.vstack(rows)


def vdot(u, v) -> np.ndarray:
    """Quaternion inner product ``u^H v = sum conj(u_i) v_i``."""
    return qmul(qconj(u), v).sum(axis=0)


def vnorm(v) -> float:
    return float(np.sqrt(qabs2(v).sum()))


@dataclass(frozen=True)
class AugmentedVector:
    """The stacked vector ``[q; q^i; q^j; q^k]``, stored as a ``(4, n, 4)`` array.

    All four blocks are kept explicitly so that drift introduced by arithmetic
    on the augmented form can be detected with :meth:`check`.
    """

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=float)
        if b.ndim != 3 or b.shape[0] != 4 or b.shape[2] != 4:
            raise ValueError(f"augmented blocks must have shape (4, n, 4), got {b.shape}")
        object.__setattr__(self, "blocks", b)

    @property
    def n(self) -> int:
        return self.blocks.shape[1]

    @classmethod
    def from_quat(cls, q) -> "AugmentedVector":
        q = np.asarray(q, dtype=float).reshape(-1, 4)
        return cls(np.stack([q] + [qinvolution(q, ax) for ax in AXES]))

    @classmethod
    def from_flat(cls, flat, check: bool = True) -> "AugmentedVector":
        """Inverse of :meth:`as_flat`; ``flat`` is a ``(4n, 4)`` quaternion vector."""
        flat = np.asarray(flat, dtype=float)
        if flat.ndim != 2 or flat.shape[1] != 4 or flat.shape[0] % 4:
            raise ValueError(f"flat augmented vector must have shape (4n, 4), got {flat.shape}")
        u = cls(flat.reshape(4, -1, 4))
        if check:
            u.check()
        return u

    def as_flat(self) -> np.ndarray:
        return self.blocks.reshape(-1, 4)

    def inconsistency(self) -> float:
        """Relative deviation of blocks 1-3 from the involutions of block 0."""
        ref = AugmentedVector.from_quat(self.blocks[0]).blocks
        scale = np.linalg.norm(ref)
        err = np.linalg.norm(self.blocks - ref)
        if scale == 0.0:
            return 0.0 if err == 0.0 else np.inf
        return float(err / scale)

    def is_consistent(self, rtol: float = CONSISTENCY_RTOL) -> bool:
        return self.inconsistency() <= rtol

    def check(self, rtol: float = CONSISTENCY_RTOL) -> "AugmentedVector":
        dev = self.inconsistency()
        if dev > rtol:
            raise InconsistentAugmentedVector(
                f"augmented vector blocks deviate from involutions of block 0 by {dev:.3e} (rtol {rtol:g})"
            )
        return self

    def norm(self) -> float:
        return vnorm(self.as_flat())


def decompose(q) -> np.ndarray:
    """Real coordinate vector ``[q_a; q_b; q_c; q_d]`` of a quaternion vector."""
    q = np.asarray(q, dtype=float).reshape(-1, 4)
    return q.T.reshape(-1).copy()


def assemble(r) -> np.ndarray:
    """Quaternion vector from its component-major real coordinates."""
    r = np.asarray(r, dtype=float).reshape(-1)
    if r.size % 4:
        raise ValueError(f"real coordinate vector length must be divisible by 4, got {r.size}")
    return r.reshape(4, -1).T.copy()


def lift(r) -> AugmentedVector:
    """``J r``: augmented vector of the quaternion vector with coordinates ``r``."""
    return AugmentedVector.from_quat(assemble(r))


def flatten(u: AugmentedVector, rtol: float = CONSISTENCY_RTOL) -> np.ndarray:
    """``J^H u / 4``, the exact inverse of :func:`lift` on consistent vectors."""
    u.check(rtol)
    # (J^H u)_col = conj(unit_col) * sum_row sign[row, col] u_row, whose real
    # part is coordinate ``col`` of the signed block sum
    acc = np.tensordot(_J_SIGNS, u.blocks, axes=(0, 0))  # (col, n, 4)
    out = acc[np.arange(4), :, np.arange(4)]  # (col, n)
    return (out.reshape(-1) / 4.0).copy()


def extract(u: AugmentedVector) -> np.ndarray:
    """Block 0 of an augmented vector (the ``P = [I 0 0 0]`` selection)."""
    return u.blocks[0].copy()


def j_matrix(n: int) -> np.ndarray:
    """The ``4n x 4n`` quaternion matrix ``J`` as an array of shape ``(4n, 4n, 4)``."""
    out = np.zeros((4 * n, 4 * n, 4))
    eye = np.eye(n)
    for row in range(4):
        for col in range(4):
            unit = np.zeros(4)
            unit[col] = _J_SIGNS[row, col]
            out[row * n:(row + 1) * n, col * n:(col + 1) * n] = eye[:, :, None] * unit
    return out
