# %% [markdown]
# # Gradient descent that only sees statistical queries
#
# Each coordinate of the square-loss gradient splits into a query that never
# looks at the label and a correlation query. An oracle that answers every
# query only up to a tolerance `tau` can therefore drive gradient descent, and
# an adversarial oracle can steer it away from the hidden parity.

# %%
import numpy as np

from relu_lab._rng import substream
from relu_lab.datagen import SlpnInstance, lifted_parity_dataset
from relu_lab.gaussian_stats import OPT_THRESHOLD
from relu_lab.learners import square_loss
from relu_lab.slpn_reduction import auto_epsilon
from relu_lab.sq_sim import (
    EmpiricalDistribution,
    SqOracle,
    gd_via_sq,
    gradient_queries,
    null_signal,
)

# %%
ds = lifted_parity_dataset(SlpnInstance.random(6, 2, 0.0, seed=0), 100_000, seed=0)
dist = EmpiricalDistribution(ds.X, ds.y)
eps, gap = auto_epsilon(2, 0.0)
w0 = substream(0, "sq-w0").standard_normal(6)
w0 *= 0.1 / np.linalg.norm(w0)

# %% [markdown]
# ## An honest oracle

# %%
oracle = SqOracle(seed=0)
traj = gd_via_sq(w0, 50, 0.5, oracle, dist, tau=1e-3)
print(f"queries {oracle.count} (= 2 * d * steps = {2 * 6 * 50})")
print(f"final loss {square_loss(traj[-1], ds.X, ds.y):.4f} vs random-label floor {OPT_THRESHOLD:.4f}")

# %% [markdown]
# ## How much signal does a single query carry?
#
# Along the honest trajectory, the largest normalized distance between a
# query's true answer and its answer under label-independent data is what an
# adversary has to cover.

# %%
signal = max(null_signal(q, dist) for w in traj for i in range(6) for q in gradient_queries(w, i, 1.0))
print(f"largest normalized signal {signal:.3f}; loss gap {gap:.3f}")

# %% [markdown]
# ## Adversarial oracles
#
# With `tau` at the loss gap the adversaries cannot cover that signal. With
# `tau = 0.3` every rule keeps descent above `1/2 - 1/(4 pi) - eps`.

# %%
rules = [("plus", 0), ("minus", 0), ("flip", 0), ("null", 0)] + [("random", s) for s in range(3)]
for tau in (gap, 0.3):
    finals = [square_loss(gd_via_sq(w0, 50, 0.5, SqOracle("adversarial", r, seed=s), dist, tau)[-1], ds.X, ds.y)
              for r, s in rules]
    stuck = sum(f >= OPT_THRESHOLD - eps for f in finals)
    print(f"tau={tau:.3f}: stuck {stuck}/{len(rules)}; final losses {np.round(finals, 3)}")

