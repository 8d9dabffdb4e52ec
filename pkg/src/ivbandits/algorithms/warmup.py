"""Warm-up estimate of a lower bound on ``sigma_min(Gamma)``.

Doubles an E-design batch until the lower confidence bound on the smallest
singular value of Gamma exceeds half the upper one, then returns the lower
bound. Instruments are assumed to have norm at most one and the first-stage
noise to be 1-sub-Gaussian; larger instruments are rescaled internally.
"""

import math

import numpy as np

from ..design import e_design, round_design
from ..errors import CapExceeded
from ..estimators import LogBarMode, fit_gamma_ols, log_bar
from ..instances import Gram, sample_counts
from ..numerics import sigma_min
from ._common import PhaseRecord, r_of

MAX_DOUBLINGS = 60


def confidence_radius_sq(stats, delta):
    """``psi_t / t`` with ``psi_t = sigma_min(V_t / t)^{-1} logbar(V_t, delta)`` (unit-norm instruments)."""
    t = stats.n
    smin = sigma_min(stats.ztz / t)
    if smin <= 0:
        return math.inf
    lb = log_bar(stats, delta, L_z=1.0, mode=LogBarMode.THEORETICAL)
    return lb / smin / t


def estimate_lambda_min(env, params, rng, return_trace=False):
    """Return ``(lcb, samples)``; with probability ``1 - delta``,
    ``sigma_min(Gamma) / 2 < lcb <= sigma_min(Gamma)``.

    With ``return_trace`` a list of :class:`PhaseRecord` (kind ``"warmup"``,
    one per doubling) is appended to the returned tuple.
    """
    scale = max(env.L_z, 1e-300)
    Zs = env.Z / scale
    design, _ = e_design(Zs)
    base_n = r_of(design, params.omega)
    base = round_design(design, base_n)
    counts = np.zeros(env.n_arms, dtype=np.int64)
    stats = Gram.empty(env.d)
    trace = []
    for j in range(1, MAX_DOUBLINGS + 1):
        target = base * 2 ** (j - 1)
        stats = stats + sample_counts(env, target - counts, rng)
        counts = target
        # refit in the rescaled coordinates: z' = z / L_z, Gamma' = L_z Gamma
        scaled = Gram(stats.ztz / scale ** 2, stats.ztx / scale, stats.zty / scale, stats.n)
        gamma_hat = fit_gamma_ols(scaled)
        s = sigma_min(gamma_hat)
        rad = math.sqrt(confidence_radius_sq(scaled, params.delta))
        lcb, ucb = s - rad, s + rad
        trace.append(PhaseRecord(j, math.nan, (), int(stats.n), "warmup", lcb / scale, design, gamma_hat / scale,
                                 {"lcb": lcb / scale, "ucb": ucb / scale}))
        if lcb > 0.5 * ucb:
            out = (lcb / scale, int(stats.n))
            return out + (trace,) if return_trace else out
    raise CapExceeded("warm-up did not separate its confidence bounds")
