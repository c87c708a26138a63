# %% [markdown]
# # How much does a ReLU correlate with a sparse parity?
#
# A ReLU over the sum of `k` Gaussian coordinates and the product of their
# signs share only Hermite components of degree at least `k`. This demo
# computes that overlap three ways and shows how slowly the Hermite series
# closes in on the exact value.

# %%
import math

import numpy as np

from relu_lab.hermite import (
    correlation_lower_bound,
    correlation_series,
    relu_coefficient,
    relu_parity_inner_product,
    sign_coefficient,
)
from relu_lab.numeric_oracle import correlation_2d_quadrature, correlation_closed_form, mc_expectation
from relu_lab.cli import correlation_integrand

SQRT_2PI = math.sqrt(2 * math.pi)

# %% [markdown]
# ## One-dimensional coefficients
#
# The ReLU has a nonzero coefficient at degree 1 and at every even degree;
# the sign function lives on odd degrees only.

# %%
for i in range(9):
    print(f"degree {i}: relu {relu_coefficient(i):+.6f}   sign {sign_coefficient(i):+.6f}")

# %% [markdown]
# ## The k = 2 overlap
#
# For two coordinates the expectation has the closed form
# `(2 - sqrt 2) / (2 sqrt pi)`. Dividing by `sqrt(2 pi)` puts it on the scale
# of the inner product used by the reduction.

# %%
exact = correlation_closed_form() / SQRT_2PI
quad = correlation_2d_quadrature() / SQRT_2PI
mc = mc_expectation(correlation_integrand(2), 2, 2_000_000, seed=0)
print(f"closed form     {exact:.8f}")
print(f"2-D quadrature  {quad:.8f}")
print(f"Monte Carlo     {mc.mean / SQRT_2PI:.6f} +- {mc.stderr / SQRT_2PI:.1e}")
print(f"lower bound     {correlation_lower_bound(2) / SQRT_2PI:.6f}")

# %% [markdown]
# ## Series truncation
#
# The shortfall decays like `n^(-3/2)`: roughly tenfold for every fivefold
# increase in the cutoff. At a cutoff of 42 the series is still about `2e-4`
# short of the exact value.

# %%
for n_max in (42, 202, 1002):
    value = relu_parity_inner_product(2, n_max)
    print(f"n_max={n_max:5d}  series {value:.8f}  shortfall {exact - value:.2e}")

# %% [markdown]
# ## Larger parities
#
# The overlap shrinks quickly with `k`, which is what makes sparse parities
# hard to detect through a ReLU learner.

# %%
for k, n_max in ((2, 42), (6, 46), (10, 30)):
    s = correlation_series(k, n_max)
    print(f"k={k:2d}  n_max={n_max}  inner product {s.inner_product:.3e}  last term {s.last_term:.1e}")
