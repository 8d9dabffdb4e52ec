"""Elimination with Gamma unknown (CPEUG).

Each phase first refits Gamma (doubling the batch until the first-stage error
term of the P-2SLS interval is below the phase tolerance), then collects a
fresh second-stage batch, forms the P-2SLS estimate and eliminates.
"""

import math

import numpy as np

from ..design import e_design, minimax_value, round_design, uniform_design, Design
from ..errors import BadParam, CapExceeded, NotPSD
from ..estimators import abar, fit_gamma_ols, log_bar
from ..instances import Gram, sample_counts
from ..numerics import mahalanobis_sq
from ._common import (PhaseRecord, active_pairs, eliminate, empirical_best, finish,
                      phase_size, psi_estimate, pull, r_of, cached_xy_design)

MAX_DOUBLINGS = 60


def stop_value(env, active, stats, gamma_hat, delta, params):
    """``max_{w,w'} ||w - w'||_{A_bar(Z, Gamma_hat)^{-1}} B sqrt(L_eta logbar(Z, delta))``.

    ``B`` is ``params.bounds.theta_norm_bound`` standing in for ``||theta||_2``.
    Returns inf while ``A_bar`` is singular.
    """
    if len(active) < 2:
        return 0.0
    pairs = active_pairs(env.W, active)
    try:
        nsq = float(np.max(mahalanobis_sq(pairs, abar(stats, gamma_hat))))
    except NotPSD:
        return math.inf
    lb = log_bar(stats, delta, d=env.d, L_z=env.L_z, mode=params.log_mode)
    b = params.bounds
    return math.sqrt(nsq) * b.theta_norm_bound * math.sqrt(b.L_eta * lb)


def _ols_or_none(stats):
    try:
        return fit_gamma_ols(stats)
    except Exception:
        return None


def _batch_sizes(env, params, M, delta, r):
    """``N'`` of the doubling loop, with ``delta`` the phase-level confidence."""
    d, g, Lz2 = env.d, params.g, env.L_z ** 2
    delta1 = delta / 4.0
    n_prime = (4 * g * d * M * math.log(1 + 2 * M * (d + Lz2) + 2 * M * 2 * g * d * M)
               + 8 * M * (math.log(2 / delta1) + d * math.log(6)))
    return max(int(math.floor(n_prime)), r)


def _n0(env, params, M, n1, delta_l, r_e, kappa_0):
    d, g, Lz2 = env.d, params.g, env.L_z ** 2
    raw = 2 * g * d * M * math.log(M * (d + n1 + Lz2)) + 4 * M * (math.log(2 / delta_l) + d * math.log(6))
    return max(int(math.ceil(raw)), r_e, int(math.ceil(2.0 / kappa_0 - 1e-12)))


def gamma_estimator(env, active, gamma_prev, zeta, delta, params, lambda_E, kappa_0, M, rng,
                    design_kind="xy"):
    """Refit Gamma for one phase.

    ``delta`` is the phase-level confidence (``delta / k^2`` of the caller);
    iteration ``l`` of the doubling loop uses ``delta / (4 l^2)``. Returns
    ``(gamma_hat, samples_used, l_final, log)`` where ``log`` has one entry per
    doubling iteration.
    """
    omega = params.omega
    r_e = r_of(lambda_E, omega)
    log = []
    used = 0
    if gamma_prev is None:
        base = max(r_e, int(math.ceil(2.0 / kappa_0 - 1e-12)))
        ell = 1
        while True:
            delta_l = delta / (4.0 * ell * ell)
            n = (2 ** (ell - 1)) * base
            _, stats = pull(env, lambda_E, n, rng)
            used += n
            gamma_hat = _ols_or_none(stats)
            stop = math.inf if gamma_hat is None else stop_value(env, active, stats, gamma_hat, delta_l, params)
            log.append({"ell": ell, "N0": n, "N1": 0, "stop": stop})
            if stop <= 1.0:
                return gamma_hat, used, ell, log
            ell += 1
            if ell > MAX_DOUBLINGS or used > params.max_total_samples:
                raise CapExceeded("gamma estimator did not reach its stopping rule")

    if design_kind == "xy":
        tilde = cached_xy_design(active_pairs(env.W, active), env.Z, gamma_prev, params.solver)
    else:
        tilde = uniform_design(env.n_arms)
    r = r_of(tilde, omega)
    n_prime = _batch_sizes(env, params, M, delta, r)
    counts0 = np.zeros(env.n_arms, dtype=np.int64)
    stats0 = Gram.empty(env.d)
    ell = 1
    while True:
        delta_l = delta / (4.0 * ell * ell)
        n1 = (2 ** ell) * n_prime
        _, stats1 = pull(env, tilde, n1, rng)
        n0 = _n0(env, params, M, n1, delta_l, r_e, kappa_0)
        # grow the E-design block to n0 pulls without discarding earlier ones
        target = np.maximum(round_design(lambda_E, n0), counts0)
        extra = target - counts0
        if extra.any():
            stats0 = stats0 + sample_counts(env, extra, rng)
        counts0 = target
        used += n1 + int(extra.sum())
        stats = stats0 + stats1
        gamma_hat = _ols_or_none(stats)
        stop = math.inf if gamma_hat is None else stop_value(env, active, stats, gamma_hat, delta_l, params)
        log.append({"ell": ell, "N0": int(counts0.sum()), "N0_formula": n0, "N1": n1, "stop": stop})
        if stop <= zeta:
            return gamma_hat, used, ell, log
        ell += 1
        if ell > MAX_DOUBLINGS or used > params.max_total_samples:
            raise CapExceeded("gamma estimator did not reach its stopping rule")


def theta_estimator(env, active, delta, zeta, gamma_hat, params, rng, n_w=None, design_kind="xy"):
    """Second-stage batch designed with ``gamma_hat`` and its P-2SLS estimate.

    The batch size uses ``log(4 n_w / delta)``; pass ``delta / k^2`` and the
    full ``|W|`` to get the per-phase union bound. Returns
    ``(theta_hat, N2, design, rho)``.
    """
    n_w = len(active) if n_w is None else n_w
    pairs = active_pairs(env.W, active)
    if design_kind == "xy":
        design = cached_xy_design(pairs, env.Z, gamma_hat, params.solver)
        rho = design.objective_value
    else:
        w = np.full(env.n_arms, 1.0 / env.n_arms)
        rho = minimax_value(pairs, env.Z @ gamma_hat, w)
        design = Design(w, rho, env.n_arms)
    N2 = phase_size(rho, zeta, params.bounds.L_nu, 1, n_w, delta, params.omega, r_of(design, params.omega))
    _, stats = pull(env, design, N2, rng)
    return psi_estimate(stats, gamma_hat), N2, design, rho


def run_cpeug(env, params, rng, seed=None, gamma_design="xy", theta_design="xy"):
    """Unknown-Gamma elimination.

    ``gamma_design`` / ``theta_design`` set to ``"uniform"`` give the
    uniform-sampling ablations of either sub-phase.
    """
    if params.gamma_min is None:
        raise BadParam("run_cpeug needs params.gamma_min (a lower bound on sigma_min(Gamma))")
    name = "cpeug" if (gamma_design, theta_design) == ("xy", "xy") else f"cpeug_{gamma_design}_{theta_design}"
    W = env.W
    n_w = W.shape[0]
    active = tuple(range(n_w))
    phases = []
    if n_w == 1:
        return finish(name, env, 0, phases, seed)
    lambda_E, kappa_0 = e_design(env.Z)
    M = max(32.0 * params.bounds.L_eta / (params.gamma_min ** 2 * kappa_0), 1.0)
    gamma_hat = None
    theta_hat = np.zeros(env.d)
    total = 0
    k = 1
    zeta = 1.0
    while len(active) > 1:
        partial = lambda: finish(name, env, empirical_best(active, theta_hat, W), phases, seed, cap=True)
        if k > params.max_phases:
            raise CapExceeded(f"exceeded max_phases={params.max_phases}", partial())
        delta_k = params.delta / (k * k)
        try:
            gamma_hat, used, ell, glog = gamma_estimator(
                env, active, gamma_hat, zeta, delta_k, params, lambda_E, kappa_0, M, rng, gamma_design)
        except CapExceeded as exc:
            raise CapExceeded(str(exc), partial()) from exc
        phases.append(PhaseRecord(k, zeta, active, used, "gamma", glog[-1]["stop"], None, gamma_hat,
                                  {"ell": ell, "doubling": glog, "M": M, "kappa_0": kappa_0}))
        total += used
        theta_hat, N2, design, rho = theta_estimator(env, active, delta_k, zeta, gamma_hat, params, rng,
                                                     n_w=n_w, design_kind=theta_design)
        if total + N2 > params.max_total_samples:
            raise CapExceeded(f"exceeded max_total_samples={params.max_total_samples}", partial())
        survivors = eliminate(active, theta_hat, W, zeta)
        phases.append(PhaseRecord(k, zeta, active, N2, "theta", rho, design, theta_hat, {"rho": rho}))
        total += N2
        active = survivors
        k += 1
        zeta = 2.0 ** -k
    return finish(name, env, active[0], phases, seed, M=M, kappa_0=kappa_0)
