"""Experimental designs over the instrument set.

* :func:`xy_design` -- minimax design ``min_lambda max_y y^T A(lambda)^{-1} y``
  with ``A(lambda) = sum_z lambda_z Gamma^T z z^T Gamma``.
* :func:`e_design` -- E-optimal design maximizing the smallest eigenvalue
  of ``sum_z lambda_z z z^T``.
* :func:`round_design` -- efficient apportionment of a design into
  integer pull counts.
* :func:`rho_star` and :func:`oracle_lower_bound_samples` -- the
  instance hardness and the matching non-adaptive sample threshold.

The minimax design is a max of smooth convex functions, where plain
Frank-Wolfe can cycle between vertices when several directions tie. It is
solved in epigraph form with SLSQP and certified by a linear-programming
lower bound; Frank-Wolfe (open-loop steps ``2/(t+2)``) is the fallback.
The E-optimal design uses Frank-Wolfe with averaged supergradients.
"""

from dataclasses import dataclass, field
from itertools import combinations
import math

import numpy as np
from scipy.optimize import linprog, minimize

from .errors import BadDelta, BadParam, DegenerateSpan, TooFewSamples
from .instances import best_arm


@dataclass(frozen=True)
class SolverOptions:
    """``method`` is ``"slsqp"`` (certified, falls back to Frank-Wolfe when the
    certificate misses ``rel_tol``) or ``"fw"``."""

    max_iters: int = 5000
    rel_tol: float = 1e-6
    clip: float = 1e-5
    record_trace: bool = False
    method: str = "slsqp"

    def __post_init__(self):
        if self.max_iters < 1 or self.rel_tol <= 0 or self.clip < 0:
            raise BadParam("solver options must be positive")
        if self.method not in ("slsqp", "fw"):
            raise BadParam("method must be 'slsqp' or 'fw'")


@dataclass(frozen=True)
class Design:
    """A distribution over the arms of ``Z``.

    ``objective_value`` is the solver objective at ``weights``. ``trace`` is
    the best-so-far objective per iteration when requested.
    """

    weights: np.ndarray
    objective_value: float
    support_size: int
    iterations: int = 0
    trace: tuple = field(default=(), repr=False)
    lower_bound: float = -math.inf

    def to_json(self):
        return {"weights": [float(w) for w in self.weights],
                "objective": float(self.objective_value),
                "support": int(self.support_size)}


@dataclass(frozen=True)
class RoundingParams:
    omega: float
    r_of_omega: int

    def __post_init__(self):
        if not 0 < self.omega <= 1:
            raise BadParam("omega must lie in (0, 1]")
        if self.r_of_omega < 1:
            raise BadParam("r_of_omega must be at least 1")


def pair_differences(W, active=None):
    """Row differences ``w - w'`` over unordered pairs of (active) rows of ``W``."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    idx = range(W.shape[0]) if active is None else sorted(active)
    diffs = [W[i] - W[j] for i, j in combinations(idx, 2)]
    return np.array(diffs).reshape(-1, W.shape[1])


def uniform_design(n):
    return Design(np.full(n, 1.0 / n), math.nan, n)


def _clip_weights(weights, clip):
    w = np.where(weights < clip, 0.0, weights)
    if w.sum() <= 0:
        w = weights.copy()
    return w / w.sum()


def _pd_inverse(A):
    try:
        np.linalg.cholesky(A)
        return np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return None


def minimax_value(Y, M, weights, allow_singular=True):
    """``max_y y^T A(weights)^{-1} y`` with ``A = M^T diag(weights) M``.

    For singular ``A`` the value is the limit along interior designs: finite
    (via the pseudo-inverse) when every ``y`` lies in the range of ``A``, inf
    otherwise. With ``allow_singular=False`` any singular ``A`` gives inf.
    """
    weights = np.asarray(weights, dtype=float)
    A = M.T @ (weights[:, None] * M)
    Ainv = _pd_inverse(A)
    if Ainv is None:
        if not allow_singular:
            return math.inf
        Ainv = np.linalg.pinv(A, hermitian=True)
        resid = Y - Y @ (A @ Ainv)
        if np.max(np.abs(resid), initial=0.0) > 1e-8 * max(1.0, np.abs(Y).max()):
            return math.inf
    return float(np.max(np.einsum("ij,jk,ik->i", Y, Ainv, Y)))


def _q_and_grad(Y, M, lam, ridge=0.0):
    """Per-direction objective ``q_y`` and ``G[y, z] = (y^T A^{-1} m_z)^2 = -dq_y/dlambda_z``."""
    A = M.T @ (lam[:, None] * M)
    if ridge:
        A = A + ridge * np.eye(M.shape[1])
    B = Y @ np.linalg.inv(A)
    return np.einsum("ij,ij->i", B, Y), (B @ M.T) ** 2


def minimax_certificate(Y, M, weights):
    """Lower bound on ``min_lambda max_y q_y(lambda)`` from the design ``weights``.

    For any mixture ``mu`` over directions, convexity of ``sum mu_y q_y`` gives
    ``min >= 2 mu.q - max_z (mu G)_z``; the best ``mu`` solves a small LP.
    The bound is taken at a point mixed 1e-7 toward uniform so that ``A`` is
    invertible even when ``weights`` has zeros.
    """
    weights = np.asarray(weights, dtype=float)
    weights = (1 - 1e-7) * weights + 1e-7 / weights.shape[0]
    try:
        q, G = _q_and_grad(Y, M, weights)
    except np.linalg.LinAlgError:
        return -math.inf
    m, n = G.shape
    c = np.concatenate([-2.0 * q, [1.0]])
    A_ub = np.hstack([G.T, -np.ones((n, 1))])
    A_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    return float(-res.fun) if res.status == 0 else -math.inf


def _slsqp_minimax(Y, M, opts):
    n, d = M.shape
    lam0 = np.full(n, 1.0 / n)
    ridge = 1e-12 * np.trace(M.T @ M) / d
    scale = float(np.max(_q_and_grad(Y, M, lam0, ridge)[0]))
    if not (math.isfinite(scale) and scale > 0):
        return None
    trace = []

    def cons(x):
        return x[-1] - _q_and_grad(Y, M, np.maximum(x[:n], 0.0), ridge)[0] / scale

    def jac(x):
        q, G = _q_and_grad(Y, M, np.maximum(x[:n], 0.0), ridge)
        return np.hstack([G / scale, np.ones((q.shape[0], 1))])

    def record(x):
        lam = np.maximum(x[:n], 0.0)
        val = minimax_value(Y, M, lam / lam.sum()) if lam.sum() > 0 else math.inf
        trace.append(min(val, trace[-1]) if trace else val)

    grad_t = np.zeros(n + 1)
    grad_t[-1] = 1.0
    sum_jac = np.concatenate([np.ones(n), [0.0]])
    with np.errstate(all="ignore"):
        try:
            res = minimize(lambda x: x[-1], np.append(lam0, 1.0), jac=lambda x: grad_t, method="SLSQP",
                           bounds=[(0.0, 1.0)] * n + [(0.0, None)],
                           constraints=[{"type": "ineq", "fun": cons, "jac": jac},
                                        {"type": "eq", "fun": lambda x: x[:n].sum() - 1.0,
                                         "jac": lambda x: sum_jac}],
                           callback=record if opts.record_trace else None,
                           options={"maxiter": min(opts.max_iters, 1000), "ftol": 1e-12})
        except (np.linalg.LinAlgError, ValueError):
            return None
    lam = np.maximum(res.x[:n], 0.0)
    if not np.all(np.isfinite(lam)) or lam.sum() <= 0:
        return None
    return lam / lam.sum(), int(res.nit), tuple(trace)


def _fw_minimax(Y, M, opts):
    n, d = M.shape
    lam = np.full(n, 1.0 / n)
    A = M.T @ (lam[:, None] * M)
    if _pd_inverse(A) is None:
        A = A + 1e-10 * np.eye(d)
        if _pd_inverse(A) is None:
            raise DegenerateSpan("A(lambda, Gamma) is singular at the uniform design")
        jitter = 1e-10 * np.eye(d)
    else:
        jitter = 0.0
    mu = np.zeros(Y.shape[0])
    best_val, best_lam, lower = math.inf, lam.copy(), -math.inf
    trace = []
    t = 0
    for t in range(1, opts.max_iters + 1):
        A = M.T @ (lam[:, None] * M) + jitter
        Ainv = np.linalg.inv(A)
        B = Y @ Ainv
        q = np.einsum("ij,ij->i", B, Y)
        i = int(np.argmax(q))
        if q[i] < best_val:
            best_val, best_lam = float(q[i]), lam.copy()
        if opts.record_trace:
            trace.append(best_val)
        step = 2.0 / (t + 2.0)
        G = (B @ M.T) ** 2  # G[y, z] = -d f_y / d lambda_z
        # lower bound from convexity of the mu-weighted mixture of pair objectives
        mu *= 1.0 - step
        mu[i] += step
        lower = max(lower, 2.0 * float(mu @ q) - float(np.max(mu @ G)))
        if best_val - lower <= opts.rel_tol * best_val:
            break
        j = int(np.argmax(G[i]))
        lam *= 1.0 - step
        lam[j] += step
    return best_lam, best_val, t, tuple(trace)


def xy_design(pairs, Z, gamma, opts=SolverOptions()):
    """Minimax design over ``Z`` for the directions in ``pairs``."""
    Y = np.atleast_2d(np.asarray(pairs, dtype=float))
    if Y.size == 0:
        raise BadParam("xy_design needs at least one pair")
    M = np.atleast_2d(np.asarray(Z, dtype=float)) @ np.asarray(gamma, dtype=float)
    candidates = []
    if opts.method == "slsqp":
        out = _slsqp_minimax(Y, M, opts)
        if out is not None:
            candidates.append(out)
    if not candidates or opts.method == "fw" or _gap(Y, M, candidates[0][0], opts) > opts.rel_tol:
        lam, _, iters, trace = _fw_minimax(Y, M, opts)
        candidates.append((lam, iters, trace))
    best = None
    for lam, iters, trace in candidates:
        clipped = _clip_weights(lam, opts.clip)
        for w in (clipped, lam):
            val = minimax_value(Y, M, w)
            if math.isfinite(val) and (best is None or val < best[1] * (1 - 1e-12)):
                best = (w, val, iters, trace)
            if math.isfinite(val):
                break
    if best is None:
        raise DegenerateSpan("no design makes A(lambda, Gamma) invertible")
    lam, val, iters, trace = best
    lower = minimax_certificate(Y, M, lam)
    return Design(lam, val, int(np.count_nonzero(lam > 0)), iters, trace, lower)


def _gap(Y, M, lam, opts):
    val = minimax_value(Y, M, lam)
    if not math.isfinite(val):
        return math.inf
    return (val - minimax_certificate(Y, M, lam)) / val


def e_design(Z, opts=SolverOptions()):
    """E-optimal design and ``kappa_0``, the smallest eigenvalue it achieves."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    n, d = Z.shape
    if np.linalg.matrix_rank(Z) < d:
        raise DegenerateSpan("Z does not span R^d")
    lam = np.full(n, 1.0 / n)
    best_val, best_lam = -math.inf, lam.copy()
    trace = []
    t = 0
    for t in range(1, opts.max_iters + 1):
        V = Z.T @ (lam[:, None] * Z)
        ev, vecs = np.linalg.eigh(V)
        if ev[0] > best_val:
            best_val, best_lam = float(ev[0]), lam.copy()
        if opts.record_trace:
            trace.append(best_val)
        # average supergradients over a (near-)repeated smallest eigenvalue
        cluster = vecs[:, ev <= ev[0] + 1e-8]
        G = np.mean((Z @ cluster) ** 2, axis=1)
        upper = float(np.max(G)) + float(ev[0]) - float(G @ lam)
        if upper - best_val <= opts.rel_tol * max(best_val, 1e-300):
            break
        step = 2.0 / (t + 2.0)
        j = int(np.argmax(G))
        lam *= 1.0 - step
        lam[j] += step
    lam = best_lam
    clipped = _clip_weights(lam, opts.clip)
    cval = float(np.linalg.eigvalsh(Z.T @ (clipped[:, None] * Z))[0])
    if cval > 0:
        lam, best_val = clipped, cval
    design = Design(lam, best_val, int(np.count_nonzero(lam > 0)), t, tuple(trace))
    return design, best_val


def r_min(design, omega):
    """Smallest batch size for which rounding inflates the objective by at most ``1 + omega``."""
    if not 0 < omega <= 1:
        raise BadParam("omega must lie in (0, 1]")
    return int(math.ceil(2 * design.support_size / omega - 1e-12))


def round_design(design, N, params=None):
    """Integer pull counts summing to ``N`` (efficient apportionment).

    Start from ``ceil((N - p/2) lambda_z)`` on the support, then repair the
    total: add to arms minimizing ``n_z / lambda_z``, remove from arms
    maximizing ``(n_z - 1) / lambda_z``; ties go to the lowest index.
    """
    lam = np.asarray(design.weights, dtype=float)
    N = int(N)
    support = np.flatnonzero(lam > 0)
    p = support.size
    if params is not None and N < params.r_of_omega:
        raise TooFewSamples(f"N={N} below r(omega)={params.r_of_omega}")
    if N < p:
        raise TooFewSamples(f"N={N} below support size {p}")
    counts = np.zeros(lam.shape[0], dtype=np.int64)
    w = lam[support]
    n = np.ceil((N - p / 2.0) * w - 1e-9).astype(np.int64)
    n = np.maximum(n, 1)
    total = int(n.sum())
    # |total - N| <= 3p/2, so the repair loop is short
    while total != N:
        if total < N:
            j = int(np.argmin(n / w))
            n[j] += 1
            total += 1
        else:
            j = int(np.argmax((n - 1) / w))
            n[j] -= 1
            total -= 1
    counts[support] = n
    return counts


def rho_star(instance, gamma_floor=0.0, opts=SolverOptions(), return_design=False):
    """Instance hardness ``min_lambda max_{w != w*} ||w* - w||^2_{A^{-1}} / max(gap, gamma)^2``."""
    if gamma_floor < 0:
        raise BadParam("gamma_floor must be nonnegative")
    star, gaps, _ = best_arm(instance)
    others = [i for i in range(instance.W.shape[0]) if i != star]
    if not others:
        design = uniform_design(instance.n_arms)
        return (0.0, design) if return_design else 0.0
    scale = np.maximum(gaps[others], gamma_floor)
    Y = (instance.W[star] - instance.W[others]) / scale[:, None]
    design = xy_design(Y, instance.Z, instance.gamma, opts)
    return (design.objective_value, design) if return_design else design.objective_value


def oracle_lower_bound_samples(instance, Sigma, delta, opts=SolverOptions()):
    """Sample count ``sigma^2 rho* log(1/delta) / 2`` below which the
    non-adaptive oracle procedure errs with probability at least ``delta``,
    for jointly Gaussian ``[eta, eps] ~ N(0, Sigma)``."""
    if not 0 < delta <= 0.05:
        raise BadDelta("delta must lie in (0, 0.05]")
    Sigma = np.asarray(Sigma, dtype=float)
    d = instance.d
    if Sigma.shape != (d + 1, d + 1):
        raise BadParam("Sigma must be (d+1) x (d+1)")
    if np.max(np.abs(Sigma - Sigma.T)) > 1e-9 or np.min(np.linalg.eigvalsh(Sigma)) < -1e-9:
        raise BadParam("Sigma must be symmetric PSD")
    v = np.append(instance.theta, 1.0)
    sigma_sq = float(v @ Sigma @ v)
    return sigma_sq * rho_star(instance, 0.0, opts) * math.log(1.0 / delta) / 2.0
