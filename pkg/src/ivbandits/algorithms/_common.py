"""Records, parameters and helpers shared by the phased elimination algorithms."""

from dataclasses import dataclass, field, asdict
from functools import lru_cache
import json
import math

import numpy as np

from ..design import SolverOptions, pair_differences, r_min, round_design, xy_design
from ..errors import BadParam, CapExceeded, SingularDesign
from ..estimators import LogBarMode, NoiseBounds, estimate_theta_psi
from ..instances import best_arm, sample_counts

ALGO_SOLVER = SolverOptions(max_iters=2000, rel_tol=1e-3)


@dataclass(frozen=True)
class AlgoParams:
    """Inputs shared by every adaptive procedure.

    ``g`` is the constant in the Gamma-estimator batch sizes; the default 144
    is what the sample-complexity analysis needs. ``max_phases`` and
    ``max_total_samples`` turn runaway runs into :class:`CapExceeded`.
    """

    bounds: NoiseBounds
    delta: float = 0.1
    omega: float = 1.0
    gamma_min: float = None
    g: float = 144.0
    log_mode: LogBarMode = LogBarMode.PRACTICAL
    max_phases: int = 40
    max_total_samples: int = 10 ** 15
    solver: SolverOptions = ALGO_SOLVER

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise BadParam("delta must lie in (0, 1)")
        if not 0 < self.omega <= 1:
            raise BadParam("omega must lie in (0, 1]")
        if self.g < 1:
            raise BadParam("g must be at least 1")
        if self.max_phases < 1 or self.max_total_samples < 1:
            raise BadParam("caps must be positive")
        if self.gamma_min is not None and not self.gamma_min > 0:
            raise BadParam("gamma_min must be positive")
        object.__setattr__(self, "log_mode", LogBarMode(self.log_mode))


@dataclass
class PhaseRecord:
    k: int
    zeta: float
    active_set: tuple
    N: int
    kind: str  # "theta", "gamma" or "warmup"
    objective: float = math.nan
    design: object = None
    estimate: np.ndarray = None
    extra: dict = field(default_factory=dict)

    def to_json(self):
        out = {"k": self.k, "zeta": self.zeta, "N": int(self.N),
               "active_set": [int(i) for i in self.active_set],
               "objective": None if not math.isfinite(self.objective) else float(self.objective),
               "kind": self.kind}
        if self.design is not None:
            out["weights"] = [float(w) for w in self.design.weights]
        if self.estimate is not None:
            out["estimate"] = np.asarray(self.estimate).tolist()
        if self.extra:
            out["extra"] = _jsonable(self.extra)
        return out


@dataclass
class TrialResult:
    algorithm: str
    recommended: int
    correct: bool
    total_samples: int
    phases: list = field(default_factory=list)
    seed: int = None
    cap_exceeded: bool = False
    extra: dict = field(default_factory=dict)

    def trace_jsonl(self):
        return "".join(json.dumps(p.to_json()) + "\n" for p in self.phases)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def eliminate(active, theta_hat, W, threshold):
    """Drop every active arm beaten by some active arm by more than ``threshold``."""
    active = sorted(active)
    if not active:
        raise BadParam("active set is empty")
    values = np.asarray(W, dtype=float)[active] @ np.asarray(theta_hat, dtype=float)
    keep = values.max() - values <= threshold
    return tuple(a for a, k in zip(active, keep) if k)


def empirical_best(active, theta_hat, W):
    active = sorted(active)
    values = np.asarray(W, dtype=float)[active] @ np.asarray(theta_hat, dtype=float)
    return active[int(np.argmax(values))]


@lru_cache(maxsize=8192)
def _xy_cached(pair_bytes, n_pairs, z_bytes, z_shape, g_bytes, d, opts):
    pairs = np.frombuffer(pair_bytes).reshape(n_pairs, d)
    Z = np.frombuffer(z_bytes).reshape(z_shape)
    gamma = np.frombuffer(g_bytes).reshape(d, d)
    return xy_design(pairs, Z, gamma, opts)


def cached_xy_design(pairs, Z, gamma, opts):
    """``xy_design`` memoized on its exact inputs.

    Known-Gamma algorithms revisit the same active sets across trials, and the
    solver is deterministic, so caching does not change any result.
    """
    pairs = np.ascontiguousarray(pairs, dtype=float)
    Z = np.ascontiguousarray(Z, dtype=float)
    gamma = np.ascontiguousarray(gamma, dtype=float)
    return _xy_cached(pairs.tobytes(), pairs.shape[0], Z.tobytes(), Z.shape,
                      gamma.tobytes(), gamma.shape[0], opts)


def psi_estimate(stats, psi):
    """Psi-IV estimate, falling back to the minimum-norm solution
    ``(Psi^T Z^T Z Psi)^+ Psi^T Z^T Y`` when the design misses some instruments.

    Designs supported on fewer than ``d`` instruments still pin down
    ``w^T theta`` for every direction in the range of ``A``, which is all the
    elimination step compares.
    """
    try:
        return estimate_theta_psi(stats, psi)
    except SingularDesign:
        psi = np.asarray(psi, dtype=float)
        abar = psi.T @ stats.ztz @ psi
        return np.linalg.pinv(abar, hermitian=True) @ (psi.T @ stats.zty)


def active_pairs(W, active):
    return pair_differences(W, active)


def phase_size(rho, zeta, L_nu, k, n_w, delta, omega, r):
    """``ceil(2 (1+omega) zeta^-2 rho L_nu log(4 k^2 |W| / delta)) v r(omega)``."""
    raw = 2.0 * (1.0 + omega) * rho * L_nu * math.log(4.0 * k * k * n_w / delta) / zeta ** 2
    if not math.isfinite(raw):
        raise CapExceeded(f"phase size is not finite (rho={rho})")
    return max(int(math.ceil(raw)), int(r))


def pull(env, design, N, rng):
    """Round ``design`` to ``N`` pulls, sample them, and return the counts and statistics."""
    counts = round_design(design, N)
    return counts, sample_counts(env, counts, rng)


def check_caps(params, k, total, N, result_factory):
    if k > params.max_phases:
        raise CapExceeded(f"exceeded max_phases={params.max_phases}", result_factory())
    if total + N > params.max_total_samples:
        raise CapExceeded(f"exceeded max_total_samples={params.max_total_samples}", result_factory())


def finish(name, env, recommended, phases, seed, cap=False, **extra):
    star, _, _ = best_arm(env)
    total = int(sum(p.N for p in phases))
    return TrialResult(name, int(recommended), bool(recommended == star), total, list(phases), seed, cap, extra)


def r_of(design, omega):
    return r_min(design, omega)


def to_dict(result):
    """Flat summary of a TrialResult (no phase payloads)."""
    out = asdict(result)
    out.pop("phases")
    return _jsonable(out)
