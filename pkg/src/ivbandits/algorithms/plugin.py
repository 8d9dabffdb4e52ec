"""Elimination with a fixed Gamma estimate fit on offline data.

The first-stage error of the plug-in estimate cannot shrink during the run,
so the procedure only promises an arm within ``6 gamma`` of the best, where
``gamma`` is the first-stage error term evaluated on the offline sample.
"""

import math

import numpy as np

from ..errors import BadParam
from ..estimators import as_gram, fit_gamma_ols
from ._common import (PhaseRecord, active_pairs, cached_xy_design, check_caps, eliminate,
                      empirical_best, finish, psi_estimate, pull, r_of)
from .cpeug import stop_value


def gamma_slack(env, active, offline, gamma_hat, delta, params):
    """``max_{w,w'} ||w - w'||_{A_bar(Z_T, Gamma_hat)^{-1}} B sqrt(L_eta logbar(Z_T, delta))``."""
    return stop_value(env, active, as_gram(offline), gamma_hat, delta, params)


def run_cpeg_plugin(env, offline, params, rng, gamma_hat_offline=None, seed=None):
    """Phased elimination with ``Psi = Gamma_hat`` held fixed.

    Parameters
    ----------
    offline : Dataset or Gram
        The offline first-stage sample ``(Z_T, X_T)``.
    gamma_hat_offline : ndarray, optional
        Defaults to the OLS fit on ``offline``.

    The result's ``extra["gamma_slack"]`` holds ``gamma``; the recommended arm
    is guaranteed (with probability ``1 - delta``) to have gap at most
    ``6 gamma``, not to be the best arm.
    """
    stats = as_gram(offline)
    if stats.n == 0:
        raise BadParam("offline data is empty")
    G = fit_gamma_ols(stats) if gamma_hat_offline is None else np.asarray(gamma_hat_offline, dtype=float)
    W = env.W
    n_w = W.shape[0]
    active = tuple(range(n_w))
    slack = gamma_slack(env, active, stats, G, params.delta, params)
    phases = []
    if n_w == 1:
        return finish("cpeg_plugin", env, 0, phases, seed, gamma_slack=slack)
    theta_hat = None
    k = 1
    zeta = 1.0
    total = 0
    while True:
        if theta_hat is not None:
            vals = W[list(active)] @ theta_hat
            if len(active) == 1 or (vals.max() - vals.min() <= 4 * slack and zeta <= slack):
                break
        zeta = 2.0 ** -k
        design = cached_xy_design(active_pairs(W, active), env.Z, G, params.solver)
        rho = design.objective_value
        scale = min(zeta ** -2, slack ** -2) if slack > 0 else zeta ** -2
        raw = 2 * (1 + params.omega) * scale * rho * params.bounds.L_nu * math.log(4 * k * k * n_w / params.delta)
        N = max(int(math.ceil(raw)), r_of(design, params.omega))
        current = theta_hat
        check_caps(params, k, total, N, lambda: finish(
            "cpeg_plugin", env, empirical_best(active, current if current is not None else np.zeros(env.d), W),
            phases, seed, cap=True, gamma_slack=slack))
        counts, stats2 = pull(env, design, N, rng)
        theta_hat = psi_estimate(stats2, G)
        survivors = eliminate(active, theta_hat, W, zeta + slack)
        phases.append(PhaseRecord(k, zeta, active, N, "theta", rho, design, theta_hat,
                                  {"rho": rho, "gamma_slack": slack}))
        total += N
        active = survivors
        k += 1
    rec = empirical_best(active, theta_hat, W)
    return finish("cpeg_plugin", env, rec, phases, seed, gamma_slack=slack)
