"""Confounded structural-equation environments.

Every environment follows

    x = Gamma^T z + eta,    y = x^T theta + eps,

with ``z`` an instrument chosen by the experimenter. ``Gamma`` is stored in
that orientation, so row ``i`` of ``Gamma`` is ``E[x | z = Z[i]]``. For the
compliance family (``Z = W = X = {e_1..e_d}``) this makes ``Gamma``
row-stochastic: ``Gamma[i, j] = P(x = e_j | z = e_i)``.

Two samplers are provided. :func:`sample_rounds` draws individual
observations. :func:`sample_counts` draws the sufficient statistics
``(Z^T Z, Z^T X, Z^T Y)`` of a whole batch given integer pull counts per arm,
which is what the phased algorithms consume; its cost does not grow with the
batch size.
"""

from dataclasses import dataclass, field
from enum import Enum
import zlib

import numpy as np
from scipy import stats

from .errors import BadParam, DimensionMismatch, NotStochastic, TieAtTop
from .numerics import extreme_singular_values

# cells with more pulls than this are summed through a moment-matched normal
EXACT_CELL_MAX = 256


class NoiseKind(str, Enum):
    COMPLIANCE = "compliance"
    JUMP_AROUND = "jump_around"
    INTERPOLATION = "interpolation"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """How the noise pair (eta, eps) is generated.

    ``params`` holds the kind-specific scales: ``sigma_eps`` for
    COMPLIANCE, ``sigma_u`` for JUMP_AROUND, ``noise_scale`` for
    INTERPOLATION and ``cov`` (the (d+1)x(d+1) covariance of ``[eta, eps]``)
    for GAUSSIAN.
    """

    kind: NoiseKind
    params: dict = field(default_factory=dict)
    sigma_eta_sq: float = 4.0
    L_eta: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.sigma_eta_sq < 0:
            raise BadParam("sigma_eta_sq must be nonnegative")
        if self.L_eta < self.sigma_eta_sq:
            raise BadParam("L_eta must be at least sigma_eta_sq")
        for key in ("sigma_eps", "sigma_u", "noise_scale"):
            if key in self.params and not self.params[key] >= 0:
                raise BadParam(f"{key} must be nonnegative")


@dataclass(frozen=True)
class Observation:
    z: np.ndarray
    x: np.ndarray
    y: float


@dataclass(frozen=True)
class Gram:
    """Sufficient statistics of a batch: ``Z^T Z``, ``Z^T X``, ``Z^T Y``, count."""

    ztz: np.ndarray
    ztx: np.ndarray
    zty: np.ndarray
    n: int

    def __add__(self, other):
        return Gram(self.ztz + other.ztz, self.ztx + other.ztx, self.zty + other.zty, self.n + other.n)

    @classmethod
    def empty(cls, d):
        return cls(np.zeros((d, d)), np.zeros((d, d)), np.zeros(d), 0)


@dataclass(frozen=True)
class Dataset:
    """Stacked observations ``Z`` (T x d), ``X`` (T x d) and ``Y`` (T,)."""

    Z: np.ndarray
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float).reshape(-1)
        if not (Z.shape == X.shape and Z.shape[0] == Y.shape[0]):
            raise DimensionMismatch(f"Z {Z.shape}, X {X.shape}, Y {Y.shape}")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def T(self):
        return self.Z.shape[0]

    def gram(self):
        return Gram(self.Z.T @ self.Z, self.Z.T @ self.X, self.Z.T @ self.Y, self.T)

    def concat(self, other):
        return Dataset(np.vstack([self.Z, other.Z]), np.vstack([self.X, other.X]),
                       np.concatenate([self.Y, other.Y]))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    Z: np.ndarray
    W: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    noise: NoiseSpec
    L_z: float = None
    name: str = ""
    spec: dict = None

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        d = theta.shape[0]
        if Z.size == 0 or W.size == 0:
            raise BadParam("Z and W must be nonempty")
        if Z.shape[1] != d or W.shape[1] != d or gamma.shape != (d, d):
            raise DimensionMismatch(f"Z {Z.shape}, W {W.shape}, gamma {gamma.shape}, d={d}")
        for name, arr in (("Z", Z), ("W", W), ("gamma", gamma), ("theta", theta)):
            if not np.all(np.isfinite(arr)):
                raise BadParam(f"{name} has non-finite entries")
        if extreme_singular_values(gamma)[0] <= 1e-10:
            raise BadParam("gamma must be invertible")
        zmax = float(np.max(np.linalg.norm(Z, axis=1)))
        L_z = zmax if self.L_z is None else float(self.L_z)
        if L_z < zmax - 1e-12:
            raise BadParam(f"L_z={L_z} below max ||z|| = {zmax}")
        for name, arr in (("Z", Z), ("W", W), ("gamma", gamma), ("theta", theta)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "L_z", L_z)

    @property
    def d(self):
        return self.theta.shape[0]

    @property
    def n_arms(self):
        return self.Z.shape[0]

    @property
    def is_compliance(self):
        return self.noise.kind in (NoiseKind.COMPLIANCE, NoiseKind.JUMP_AROUND, NoiseKind.INTERPOLATION)

    def measurement_vectors(self, gamma=None):
        """Rows ``Gamma^T z`` for every arm (uses the instance Gamma by default)."""
        g = self.gamma if gamma is None else gamma
        return self.Z @ g

    def reduced_form_means(self):
        """``E[y | z] = z^T Gamma theta`` for every arm."""
        return self.Z @ self.gamma @ self.theta

    def theta_norm(self):
        return float(np.linalg.norm(self.theta))

    def sigma_nu_sq(self):
        return 2.0 * (self.noise.sigma_eta_sq * self.theta_norm() ** 2 + 1.0)

    def fingerprint(self):
        """Bytes identifying the arrays an algorithm may see (for memoization)."""
        return b"".join(a.tobytes() for a in (self.Z, self.W, self.gamma))

    def to_spec(self):
        if self.spec is None:
            raise BadParam("instance was not built from a spec")
        return dict(self.spec)


# ---------------------------------------------------------------- builders

def _check_row_stochastic(gamma):
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < -1e-12):
        raise NotStochastic("gamma has negative entries")
    if not np.allclose(gamma.sum(axis=1), 1.0, atol=1e-9, rtol=0):
        raise NotStochastic("rows of gamma must sum to 1")
    return gamma


def make_compliance(gamma, theta, noise=None, name="compliance", spec=None):
    """Compliance instance ``Z = W = X = {e_1..e_d}``.

    ``gamma[i, j]`` is the probability that a unit encouraged toward ``i``
    takes treatment ``j``. Without ``noise`` the outcome noise is an
    independent standard normal.
    """
    gamma = _check_row_stochastic(gamma)
    d = gamma.shape[0]
    if noise is None:
        noise = NoiseSpec(NoiseKind.COMPLIANCE, {"sigma_eps": 1.0})
    eye = np.eye(d)
    if spec is None:
        spec = {"kind": "compliance", "gamma": gamma.tolist(), "theta": list(map(float, theta)),
                "sigma_eps": float(noise.params.get("sigma_eps", 1.0))}
    return ProblemInstance(eye, eye, gamma, theta, noise, L_z=1.0, name=name, spec=spec)


def jump_around_gamma(d, sigma_u):
    """Closed-form choice probabilities of the location model."""
    offsets = np.arange(d)[None, :] - np.arange(d)[:, None]  # j - i
    upper = stats.norm.cdf((offsets + 0.5) / sigma_u)
    lower = stats.norm.cdf((offsets - 0.5) / sigma_u)
    upper[:, -1] = 1.0
    lower[:, 0] = 0.0
    return upper - lower


def make_jump_around(d, theta, sigma_u, name="jump_around"):
    """Location model: encouragement ``i`` and preference ``u ~ N(0, sigma_u^2)``
    lead to treatment ``J = nearest index to i + u`` and outcome
    ``y = theta_J + u``."""
    if d < 2 or not sigma_u > 0:
        raise BadParam("jump-around needs d >= 2 and sigma_u > 0")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (d,):
        raise DimensionMismatch(f"theta must have length {d}")
    gamma = jump_around_gamma(d, sigma_u)
    noise = NoiseSpec(NoiseKind.JUMP_AROUND, {"sigma_u": float(sigma_u)})
    spec = {"kind": "jump_around", "d": d, "theta": theta.tolist(), "sigma_u_sq": float(sigma_u) ** 2}
    return make_compliance(gamma, theta, noise=noise, name=name, spec=spec)


def interpolation_gamma(d, eps):
    return (1.0 - eps) / d * np.ones((d, d)) + eps * np.eye(d)


def make_interpolation(d, theta, eps, noise_scale=0.4, name="interpolation"):
    """Compliance with ``Gamma = (1-eps)/d 11^T + eps I`` and outcome noise
    ``eps_t = noise_scale * eta_t^T v_t`` for a uniform random unit ``v_t``."""
    if not 0 < eps <= 1:
        raise BadParam("eps must lie in (0, 1]")
    if not noise_scale >= 0:
        raise BadParam("noise_scale must be nonnegative")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (d,):
        raise DimensionMismatch(f"theta must have length {d}")
    noise = NoiseSpec(NoiseKind.INTERPOLATION, {"noise_scale": float(noise_scale)})
    spec = {"kind": "interpolation", "d": d, "theta": theta.tolist(), "eps": float(eps),
            "noise_scale": float(noise_scale)}
    return make_compliance(interpolation_gamma(d, eps), theta, noise=noise, name=name, spec=spec)


def make_gaussian(Z, W, gamma, theta, cov=None, sigma_eps=1.0, sigma_eta_sq=1.0, L_eta=None,
                  name="gaussian"):
    """General instance with jointly Gaussian ``[eta, eps] ~ N(0, cov)``.

    Without ``cov`` the noise is exogenous: ``eta ~ N(0, sigma_eta_sq I)``
    independent of ``eps ~ N(0, sigma_eps^2)``.
    """
    theta = np.asarray(theta, dtype=float)
    d = theta.shape[0]
    if cov is None:
        cov = np.diag([sigma_eta_sq] * d + [sigma_eps ** 2])
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (d + 1, d + 1):
        raise DimensionMismatch("cov must be (d+1) x (d+1)")
    if np.min(np.linalg.eigvalsh((cov + cov.T) / 2)) < -1e-10:
        raise BadParam("cov must be PSD")
    s_eta = float(np.max(np.linalg.eigvalsh(cov[:d, :d]))) if d else 0.0
    noise = NoiseSpec(NoiseKind.GAUSSIAN, {"cov": cov}, sigma_eta_sq=s_eta,
                      L_eta=s_eta if L_eta is None else L_eta)
    spec = {"kind": "gaussian", "Z": np.asarray(Z, float).tolist(), "W": np.asarray(W, float).tolist(),
            "gamma": np.asarray(gamma, float).tolist(), "theta": theta.tolist(), "cov": cov.tolist()}
    return ProblemInstance(Z, W, gamma, theta, noise, name=name, spec=spec)


def instance_from_spec(spec):
    """Build an instance from its serialized form (see ``ProblemInstance.to_spec``)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    name = spec.pop("name", kind)
    try:
        if kind == "jump_around":
            if "sigma_u_sq" in spec:
                sigma_u = float(np.sqrt(spec.pop("sigma_u_sq")))
            else:
                sigma_u = float(spec.pop("sigma_u"))
            inst = make_jump_around(int(spec.pop("d")), spec.pop("theta"), sigma_u, name=name)
        elif kind == "interpolation":
            inst = make_interpolation(int(spec.pop("d")), spec.pop("theta"), float(spec.pop("eps")),
                                      float(spec.pop("noise_scale", 0.4)), name=name)
        elif kind == "compliance":
            sigma_eps = float(spec.pop("sigma_eps", 1.0))
            noise = NoiseSpec(NoiseKind.COMPLIANCE, {"sigma_eps": sigma_eps})
            gamma = spec.pop("gamma")
            theta = spec.pop("theta")
            inst = make_compliance(gamma, theta, noise=noise, name=name,
                                   spec={"kind": "compliance", "gamma": gamma, "theta": theta,
                                         "sigma_eps": sigma_eps})
        elif kind == "gaussian":
            inst = make_gaussian(spec.pop("Z"), spec.pop("W"), spec.pop("gamma"), spec.pop("theta"),
                                 cov=spec.pop("cov", None), name=name)
        else:
            raise BadParam(f"unknown instance kind {kind!r}")
    except KeyError as exc:
        raise BadParam(f"instance spec missing field {exc}") from exc
    if spec:
        raise BadParam(f"unknown instance fields: {sorted(spec)}")
    return inst


# ---------------------------------------------------------------- sampling

def trial_rng(master_seed, *keys):
    """Independent, reproducible stream for one trial.

    String keys are hashed with CRC32 so the stream does not depend on
    Python's per-process hash randomization.
    """
    entropy = [int(master_seed) & 0xFFFFFFFF]
    for k in keys:
        entropy.append(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _categorical(rng, probs_rows):
    """One categorical draw per row of ``probs_rows``."""
    cdf = np.cumsum(probs_rows, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(probs_rows.shape[0])
    return (u[:, None] > cdf).sum(axis=1)


def sample_rounds(instance, z_indices, rng):
    """Draw one observation per entry of ``z_indices``; returns a :class:`Dataset`."""
    idx = np.asarray(z_indices, dtype=int).reshape(-1)
    inst = instance
    d = inst.d
    n = idx.shape[0]
    Z = inst.Z[idx]
    kind = inst.noise.kind
    if kind == NoiseKind.GAUSSIAN:
        cov = inst.noise.params["cov"]
        noise = rng.multivariate_normal(np.zeros(d + 1), cov, size=n, method="eigh")
        X = Z @ inst.gamma + noise[:, :d]
        Y = X @ inst.theta + noise[:, d]
        return Dataset(Z, X, Y)

    if kind == NoiseKind.JUMP_AROUND:
        u = rng.normal(0.0, inst.noise.params["sigma_u"], size=n)
        # nearest index to i + u, exact half-way points go to the lower index
        J = np.clip(np.ceil(idx + u - 0.5), 0, d - 1).astype(int)
        eps = u
    else:
        J = _categorical(rng, inst.gamma[idx])
        if kind == NoiseKind.INTERPOLATION:
            eta = np.eye(d)[J] - inst.gamma[idx]
            v = rng.normal(size=(n, d))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            eps = inst.noise.params["noise_scale"] * np.einsum("ij,ij->i", eta, v)
        else:
            eps = rng.normal(0.0, inst.noise.params.get("sigma_eps", 1.0), size=n)
    X = np.eye(d)[J]
    Y = inst.theta[J] + eps
    return Dataset(Z, X, Y)


def sample_round(instance, z_index, rng):
    """A single draw from the structural model for arm ``z_index``."""
    data = sample_rounds(instance, [z_index], rng)
    return Observation(data.Z[0], data.X[0], float(data.Y[0]))


def _truncnorm_cell_sum(rng, m, a, b, scale):
    """Sum of ``m`` draws of ``scale * N(0,1)`` conditioned on ``[a, b]``."""
    if m <= EXACT_CELL_MAX:
        return float(np.sum(stats.truncnorm.rvs(a, b, scale=scale, size=m, random_state=rng)))
    mean, var = stats.truncnorm.stats(a, b, scale=scale, moments="mv")
    return float(rng.normal(m * mean, np.sqrt(m * var)))


def _noise_sums_compliance(instance, i, cell_counts, rng):
    """Total outcome noise over the pulls of arm ``i``, given treatment counts."""
    kind = instance.noise.kind
    p = instance.noise.params
    d = instance.d
    n = int(cell_counts.sum())
    if kind == NoiseKind.COMPLIANCE:
        return float(rng.normal(0.0, p.get("sigma_eps", 1.0) * np.sqrt(n))) if n else 0.0
    total = 0.0
    if kind == NoiseKind.JUMP_AROUND:
        s = p["sigma_u"]
        for j in np.flatnonzero(cell_counts):
            a = -np.inf if j == 0 else (j - i - 0.5) / s
            b = np.inf if j == d - 1 else (j - i + 0.5) / s
            total += _truncnorm_cell_sum(rng, int(cell_counts[j]), a, b, s)
        return total
    # interpolation: eps = c * eta^T v, eta fixed within a cell
    c = p["noise_scale"]
    for j in np.flatnonzero(cell_counts):
        m = int(cell_counts[j])
        eta = -instance.gamma[i].copy()
        eta[j] += 1.0
        if m <= EXACT_CELL_MAX:
            v = rng.normal(size=(m, d))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            total += c * float(np.sum(v @ eta))
        else:
            total += float(rng.normal(0.0, c * np.linalg.norm(eta) * np.sqrt(m / d)))
    return total


def sample_counts(instance, counts, rng):
    """Sufficient statistics of ``counts[i]`` pulls of every arm ``i``.

    Treatment counts are multinomial and exact. Outcome-noise totals are
    exact for Gaussian noise and for cells with at most ``EXACT_CELL_MAX``
    pulls; larger cells use a normal with the exact mean and variance.
    """
    inst = instance
    counts = np.asarray(counts, dtype=np.int64).reshape(-1)
    if counts.shape[0] != inst.n_arms or np.any(counts < 0):
        raise BadParam("counts must be nonnegative with one entry per arm")
    d = inst.d
    xsum = np.zeros((inst.n_arms, d))
    ysum = np.zeros(inst.n_arms)
    if inst.noise.kind == NoiseKind.GAUSSIAN:
        cov = inst.noise.params["cov"]
        for i in np.flatnonzero(counts):
            n = counts[i]
            tot = rng.multivariate_normal(np.zeros(d + 1), n * cov, method="eigh")
            xsum[i] = n * (inst.gamma.T @ inst.Z[i]) + tot[:d]
            ysum[i] = xsum[i] @ inst.theta + tot[d]
    else:
        for i in np.flatnonzero(counts):
            probs = np.clip(inst.gamma[i], 0.0, None)
            cells = rng.multinomial(counts[i], probs / probs.sum())
            xsum[i] = cells
            ysum[i] = cells @ inst.theta + _noise_sums_compliance(inst, i, cells, rng)
    Z = inst.Z
    return Gram(Z.T @ (counts[:, None] * Z), Z.T @ xsum, Z.T @ ysum, int(counts.sum()))


# ---------------------------------------------------------------- ground truth

def best_arm(instance, tol=1e-12):
    """Index of ``w* = argmax_w w^T theta``, the gaps ``<w* - w, theta>`` and the
    smallest positive gap."""
    values = instance.W @ instance.theta
    order = np.argsort(-values, kind="stable")
    if len(values) > 1 and values[order[0]] - values[order[1]] <= tol:
        raise TieAtTop(f"arms {order[0]} and {order[1]} tie at the top")
    star = int(order[0])
    gaps = values[star] - values
    positive = gaps[np.arange(len(gaps)) != star]
    delta_min = float(positive.min()) if positive.size else np.inf
    return star, gaps, delta_min
