"""Phased elimination with the structural matrix Gamma known (CPEG) and the
fixed-design baselines that share its round structure."""

from enum import Enum

import numpy as np

from ..design import Design, minimax_value, uniform_design
from ..errors import BadParam, DegenerateSpan
from ..instances import best_arm
from ._common import (PhaseRecord, active_pairs, cached_xy_design, check_caps, eliminate,
                      empirical_best, finish, phase_size, psi_estimate, pull, r_of)


def _phased_elimination(env, params, rng, choose_design, name, seed=None):
    """Shared loop: design, ``N_k`` pulls, oracle estimate, eliminate at ``2^-k``.

    ``choose_design(active, k)`` returns ``(design, rho)`` where ``rho`` is the
    worst active-pair objective under that design.
    """
    W = env.W
    n_w = W.shape[0]
    active = tuple(range(n_w))
    phases = []
    total = 0
    k = 1
    theta_hat = None
    while len(active) > 1:
        design, rho = choose_design(active, k)
        zeta = 2.0 ** -k
        r = r_of(design, params.omega)
        N = phase_size(rho, zeta, params.bounds.L_nu, k, n_w, params.delta, params.omega, r)
        check_caps(params, k, total, N, lambda: finish(
            name, env, empirical_best(active, theta_hat if theta_hat is not None else np.zeros(env.d), W),
            phases, seed, cap=True))
        counts, stats = pull(env, design, N, rng)
        theta_hat = psi_estimate(stats, env.gamma)
        survivors = eliminate(active, theta_hat, W, zeta)
        phases.append(PhaseRecord(k, zeta, active, N, "theta", rho, design, theta_hat,
                                  {"rho": rho, "r": r, "counts": counts}))
        total += N
        active = survivors
        k += 1
    return finish(name, env, active[0], phases, seed)


def run_cpeg(env, params, rng, seed=None):
    """Known-Gamma elimination with an XY-optimal design over the active pairs each phase."""
    def choose(active, k):
        design = cached_xy_design(active_pairs(env.W, active), env.Z, env.gamma, params.solver)
        return design, design.objective_value
    return _phased_elimination(env, params, rng, choose, "cpeg", seed)


class StaticKind(str, Enum):
    ORACLE = "oracle"
    XY = "xy"
    UNIFORM = "uniform"
    SE = "se"


def _fixed(design, env):
    M = env.Z @ env.gamma

    def choose(active, k):
        return design, minimax_value(active_pairs(env.W, active), M, design.weights)
    return choose


def run_static_baseline(env, kind, params, rng, seed=None):
    """Same rounds as CPEG but with a fixed (or active-uniform) design.

    ORACLE uses the true best arm to fix the design on ``{w* - w}``; it is a
    simulation-only benchmark.
    """
    kind = StaticKind(kind)
    n_z = env.n_arms
    if kind is StaticKind.ORACLE:
        star, _, _ = best_arm(env)
        others = [i for i in range(env.W.shape[0]) if i != star]
        if not others:
            choose = _fixed(uniform_design(n_z), env)
        else:
            Y = env.W[star] - env.W[others]
            choose = _fixed(cached_xy_design(Y, env.Z, env.gamma, params.solver), env)
    elif kind is StaticKind.XY:
        if env.W.shape[0] > 1:
            choose = _fixed(cached_xy_design(active_pairs(env.W, range(env.W.shape[0])), env.Z,
                                             env.gamma, params.solver), env)
        else:
            choose = _fixed(uniform_design(n_z), env)
    elif kind is StaticKind.UNIFORM:
        choose = _fixed(uniform_design(n_z), env)
    else:
        if n_z != env.W.shape[0]:
            raise BadParam("adaptive uniform needs one instrument per evaluation arm")
        M = env.Z @ env.gamma

        def choose(active, k):
            w = np.zeros(n_z)
            w[list(active)] = 1.0 / len(active)
            rho = minimax_value(active_pairs(env.W, active), M, w)
            if not np.isfinite(rho):
                raise DegenerateSpan("active instruments cannot resolve the active arms")
            return Design(w, rho, len(active)), rho
    return _phased_elimination(env, params, rng, choose, f"static_{kind.value}", seed)
