"""UCB1 over instruments with an OLS or IV recommender (compliance settings).

UCB1 pulls the instrument with the largest ``mu_i + sqrt(2 ln t / n_i)``
where ``mu_i`` is the mean outcome under encouragement ``i``. The
recommender is evaluated after every step:

* OLS: the treatment with the largest mean outcome among rounds where it was
  taken, which is biased under confounding;
* IV: ``argmax Gamma^{-1} mu_hat``, using the known compliance matrix.
"""

from enum import Enum
import math

import numpy as np

from ..errors import BadParam
from ..instances import best_arm, sample_rounds
from ._common import PhaseRecord, TrialResult


class Recommender(str, Enum):
    OLS = "ols"
    IV = "iv"


def _ucb_pulls(streams_y, horizon):
    """Arm index per step of UCB1 given pre-drawn reward streams ``(d, horizon)``."""
    # plain floats: per-step numpy calls on a handful of arms cost more than the arithmetic
    d = streams_y.shape[0]
    streams = streams_y.tolist()
    counts = [0] * d
    sums = [0.0] * d
    pulls = [0] * horizon
    arms = range(d)
    sqrt, log = math.sqrt, math.log
    for t in range(horizon):
        if t < d:
            a = t
        else:
            c = 2.0 * log(t)
            a = max(arms, key=lambda i: sums[i] / counts[i] + sqrt(c / counts[i]))
        sums[a] += streams[a][counts[a]]
        counts[a] += 1
        pulls[t] = a
    return np.array(pulls, dtype=np.int64)


def _argmax_rows(values):
    """Row-wise argmax treating nan as -inf (first index when a row is all nan)."""
    v = np.where(np.isnan(values), -np.inf, values)
    return np.argmax(v, axis=1)


def run_ucb_baseline(env, horizon, recommender, rng, seed=None):
    """Run UCB1 for ``horizon`` steps.

    Returns a :class:`TrialResult` whose ``extra["trace"]`` is the recommended
    arm after every step; ``recommended``/``correct`` refer to the last step.
    """
    recommender = Recommender(recommender)
    if not env.is_compliance:
        raise BadParam("UCB baselines need a compliance instance (Z = W = identity)")
    horizon = int(horizon)
    d = env.d
    if horizon < d:
        raise BadParam(f"horizon must be at least d={d}")
    # each arm's observations are drawn up front; UCB consumes them in order
    data = sample_rounds(env, np.repeat(np.arange(d), horizon), rng)
    X = data.X.reshape(d, horizon, d)
    Y = data.Y.reshape(d, horizon)
    pulls = _ucb_pulls(Y, horizon)
    order = np.zeros(horizon, dtype=np.int64)
    seen = np.zeros(d, dtype=np.int64)
    # position of step t inside its arm's stream
    for a in range(d):
        mask = pulls == a
        order[mask] = np.arange(mask.sum())
        seen[a] = mask.sum()
    y_t = Y[pulls, order]
    if recommender is Recommender.IV:
        onehot = np.zeros((horizon, d))
        onehot[np.arange(horizon), pulls] = 1.0
        n = np.cumsum(onehot, axis=0)
        s = np.cumsum(onehot * y_t[:, None], axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mu = np.where(n > 0, s / n, 0.0)
        est = np.linalg.solve(env.gamma, mu.T).T
    else:
        x_t = X[pulls, order]
        n = np.cumsum(x_t, axis=0)
        s = np.cumsum(x_t * y_t[:, None], axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            est = np.where(n > 0, s / n, np.nan)
    trace = _argmax_rows(est).astype(np.int16)
    star, _, _ = best_arm(env)
    name = f"ucb_{recommender.value}"
    phase = PhaseRecord(1, math.nan, tuple(range(d)), horizon, "ucb", math.nan, None, est[-1],
                        {"pulls_per_arm": seen})
    return TrialResult(name, int(trace[-1]), bool(trace[-1] == star), horizon, [phase], seed, False,
                       {"trace": trace})
