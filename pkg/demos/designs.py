# %% [markdown]
# # Designs and hardness
#
# With ``Gamma`` known, each elimination round samples instruments according
# to the design minimizing the worst variance of the remaining comparisons.
# Weak instruments (``Gamma`` close to the all-ones matrix over ``d``) make
# every design expensive.

# %%
import numpy as np

from ivbandits import SolverOptions, e_design, make_interpolation, make_jump_around, rho_star, round_design, xy_design
from ivbandits.design import pair_differences, r_min
from ivbandits.numerics import sigma_min

np.set_printoptions(precision=3, suppress=True)
theta = [0.5, 0.583, 0.67, 0.75]

# %% [markdown]
# ## Hardness grows like eps^-2

# %%
for eps in (1.0, 0.8, 0.4, 0.2, 0.1):
    env = make_interpolation(4, theta, eps)
    print(f"eps={eps:4.2f}  sigma_min={sigma_min(env.gamma):.3f}  rho*={rho_star(env):10.1f}")

# %% [markdown]
# ## A design on the location model
#
# The optimal design for separating arm 1 from arm 5 concentrates on their
# nudges, while the E-optimal design (used to learn ``Gamma``) is uniform.

# %%
env = make_jump_around(6, [1.0, -0.95, 0.45, 0.45, 0.95, 0.45], np.sqrt(0.275))
pairs = pair_differences(env.W, (0, 4))
des = xy_design(pairs, env.Z, env.gamma, SolverOptions(record_trace=True))
print("XY design on {w1, w5}:", des.weights, " value", round(des.objective_value, 2))
print("certified lower bound:", round(des.lower_bound, 2))
lam_E, kappa = e_design(env.Z)
print("E design:", lam_E.weights, " kappa_0", round(kappa, 3))

# %% [markdown]
# ## Rounding to integer pulls

# %%
N = 10 * r_min(des, 1.0)
counts = round_design(des, N)
print(f"N={N} pulls:", counts)
