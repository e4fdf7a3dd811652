# %% [markdown]
# # Quaternion arithmetic and augmented vectors
#
# Quaternions are stored as float arrays with a trailing axis of length 4,
# ordered `(a, b, c, d)` for `a + b i + c j + d k`.  Everything broadcasts.

# %%
import numpy as np

from quarma import quat_core as qc
from quarma import quat_linalg as ql

i, j, k = qc.I.as_array(), qc.J.as_array(), qc.K.as_array()
print("ij =", qc.qmul(i, j), " ji =", qc.qmul(j, i))

# %% [markdown]
# The product does not commute, so the side a coefficient multiplies from
# matters.  `left_matrix(p)` is the real 4x4 matrix of `q -> p q`.

# %%
rng = np.random.default_rng(0)
p, q = rng.normal(size=(2, 4))
print(np.allclose(qc.left_matrix(p) @ q, qc.qmul(p, q)))
print(np.allclose(qc.right_matrix(q) @ p, qc.qmul(p, q)))

# %% [markdown]
# ## Involutions and the augmented vector
#
# `q^i`, `q^j`, `q^k` flip the sign of the two imaginary parts other than the
# named one.  Stacking `[q; q^i; q^j; q^k]` gives the augmented vector, which
# is what the Newton-step learner works with.

# %%
gamma = rng.normal(size=(3, 4))
u = qc.AugmentedVector.from_quat(gamma)
print(u.blocks.shape, "consistent:", u.is_consistent())

# %% [markdown]
# `lift` maps real coordinates (component-major, length `4n`) to an augmented
# vector; `flatten` undoes it.  The underlying matrix `J` satisfies
# `J J^H = 4 I`.

# %%
r = qc.decompose(gamma)
print(np.allclose(qc.flatten(qc.lift(r)), r))
J = qc.j_matrix(2)
print(np.allclose(ql.qmatmul(J, ql.hermitian_transpose(J)), ql.identity(8, 4.0)))

# %% [markdown]
# ## q-determinant
#
# For a Hermitian quaternion matrix the q-determinant is the determinant of its
# complex adjoint, the product of the squared eigenvalue moduli.

# %%
B = rng.normal(size=(3, 3, 4))
A = ql.qmatmul(B, ql.hermitian_transpose(B)) + ql.identity(3, 0.5)
lam = np.linalg.eigvalsh(ql.complex_adjoint(A))[::2]
print(ql.qdet(A), np.prod(lam**2))
