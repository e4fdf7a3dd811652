# %% [markdown]
# # Online prediction of a quaternion ARMA series
#
# A qARMA(4, 2) series is generated, then predicted online with the
# gradient-descent learner (`qogd`) and the Newton-step learner (`qons`), both
# fitting an AR model of order `p + m`.  Runtime is a few seconds.

# %%
import numpy as np

from quarma.bench import bundled_config_path, parse_config, theoretical_floor
from quarma.learners import DecisionSet, run_learner
from quarma.signal_model import (
    generate_qarma,
    ma_inverse_radius,
    squared_loss,
    truncated_qar_series,
)

cfg = parse_config(bundled_config_path("example1_negated_beta"))
T = 3000
series, noise = generate_qarma(cfg.spec, cfg.noise.with_seed(0), T)
floor = theoretical_floor(cfg.noise)
print(f"floor {floor:.3f}, AR order {cfg.dim}")

# %% [markdown]
# ## Is the moving-average part invertible?
#
# Fitting a finite AR model only works when the noise can be recovered from
# past observations, i.e. when the recursion `e_t = -sum beta_i e_{t-i}` is
# stable.  The bundled `example1` config is not; this variant negates `beta`
# and is.

# %%
lit = parse_config(bundled_config_path("example1"))
print("example1 radius     ", round(ma_inverse_radius(lit.spec.beta), 3))
print("negated-beta radius ", round(ma_inverse_radius(cfg.spec.beta), 3))

# %% [markdown]
# With a known model, the truncated predictor `x_t^m` approaches the floor as
# `m` grows.

# %%
for m in (2, 6, 16, 40):
    pred = truncated_qar_series(cfg.spec, series, m)
    mse = np.mean([squared_loss(x, y) for x, y in zip(series[100:], pred[100:])])
    print(f"m={m:>2}  mse {mse:.4f}")

# %% [markdown]
# ## Online learners
#
# Neither learner knows the model.  The running average MSE drifts down
# towards the floor.

# %%
dset = DecisionSet(cfg.params.c, cfg.dim)
for algo in ("qogd", "qons"):
    tr = run_learner(algo, series, cfg.params, dset)
    checkpoints = "  ".join(f"t={t}: {tr.avg_mse[t - 1]:.3f}" for t in (100, 1000, T))
    print(f"{algo}  {checkpoints}")
