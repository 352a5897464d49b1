# %% [markdown]
# # Fixed points, flatness and the scaling map
#
# The magnetization of the Curie-Weiss spin-flip dynamics is a birth-death
# chain on {-1, -1 + 2/n, ..., 1}.  Its mean-field drift is 2 G2, and the
# zeros of G2 are the fixed points.  How flat G2 is at a fixed point decides
# which space and time scalings produce a nontrivial limit.

# %%
import numpy as np

from cwmdp import ModelParams, find_fixed_points, flatness_order, meanfield_flow
from cwmdp.experiments import table1_rows

for beta in (0.5, 1.0, 1.5):
    rep = find_fixed_points(ModelParams.curie_weiss(beta))
    orders = [flatness_order(ModelParams.curie_weiss(beta), m)[0] for m in rep.roots]
    print(f"beta={beta}: roots {np.round(rep.roots, 6)}, flatness orders {orders}")

# %% [markdown]
# At beta = 1 the origin is flat of order 2 (k = 1): the drift starts at a
# cubic term.  The mean-field flow therefore relaxes polynomially instead
# of exponentially.

# %%
for beta in (0.5, 1.0):
    path = meanfield_flow(ModelParams.curie_weiss(beta), 0.5, 5.0, dt=1e-3)
    print(f"beta={beta}: m(5) = {path.values[-1]:.5f}")

# %% [markdown]
# The regime map: scaling exponent, temperature, rescaled process and limit.

# %%
for row in table1_rows():
    print(f"{row['alpha']:>9} | {row['temperature']:<38} | {row['limit']}")
