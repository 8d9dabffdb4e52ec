# %% [markdown]
# # Why confounding breaks naive bandits
#
# Units are nudged toward one of six treatments. Their hidden preference
# ``u`` moves them off the suggested treatment *and* shifts their outcome, so
# the average outcome among people who took a treatment is biased. The
# instrument (the nudge) is independent of ``u`` and lets us undo the bias.

# %%
import numpy as np

from ivbandits import (AlgoParams, NoiseBounds, best_arm, estimate_theta_ols, estimate_theta_psi,
                       make_jump_around, sample_rounds, trial_rng)
from ivbandits.algorithms import run_cpeg, run_ucb_baseline

np.set_printoptions(precision=3, suppress=True)

env = make_jump_around(6, [1.0, -0.95, 0.0, 0.45, 0.95, 0.99], np.sqrt(0.35))
print("Gamma (row i: treatment probabilities under nudge i)")
print(env.gamma)
print("best arm:", best_arm(env)[0], " smallest gap:", best_arm(env)[2])

# %% [markdown]
# ## Regression on treatments vs. the instrumented estimate

# %%
data = sample_rounds(env, np.tile(np.arange(6), 20_000), trial_rng(0, "demo"))
print("true theta      ", env.theta)
print("OLS on X        ", estimate_theta_ols(data))
print("IV with Gamma   ", estimate_theta_psi(data, env.gamma))

# %% [markdown]
# The treatment-level averages rank arm 6 above arm 1, which is exactly the
# mistake UCB with an OLS recommender makes below.

# %%
horizon, trials = 30_000, 20
hits = {"ucb_ols": 0, "ucb_iv": 0, "cpeg": 0}
samples = []
params = AlgoParams(NoiseBounds.for_instance(env), delta=0.1)
for k in range(trials):
    hits["ucb_ols"] += run_ucb_baseline(env, horizon, "ols", trial_rng(1, "ols", k)).correct
    hits["ucb_iv"] += run_ucb_baseline(env, horizon, "iv", trial_rng(1, "iv", k)).correct
    res = run_cpeg(env, params, trial_rng(1, "cpeg", k))
    hits["cpeg"] += res.correct
    samples.append(res.total_samples)
for name, h in hits.items():
    print(f"{name:8s} success {h / trials:.2f}")
print(f"CPEG stops after {np.mean(samples):.3g} samples on average (UCB runs for {horizon})")
