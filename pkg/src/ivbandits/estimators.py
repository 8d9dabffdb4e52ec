"""Psi-IV estimators of theta, the first-stage OLS fit of Gamma, and their
finite-sample confidence widths.

Every estimator accepts either a :class:`~ivbandits.instances.Dataset` or
its :class:`~ivbandits.instances.Gram` statistics; the adaptive algorithms
only ever hold the latter.
"""

from dataclasses import dataclass
from enum import Enum
import math
import warnings

import numpy as np

from .errors import BadParam, NotPSD, SingularDesign
from .instances import Dataset, Gram
from .numerics import mahalanobis_sq, sigma_min

SINGULAR_TOL = 1e-10


class LogBarMode(str, Enum):
    THEORETICAL = "theoretical"
    PRACTICAL = "practical"


@dataclass(frozen=True)
class NoiseBounds:
    """Known upper bounds on the noise scales and on ``||theta||_2``.

    If ``theta_norm_bound`` is omitted it is recovered from
    ``L_nu = 2 (L_eta B^2 + 1)``.
    """

    L_nu: float
    L_eta: float
    theta_norm_bound: float = None

    def __post_init__(self):
        if not (self.L_nu > 0 and self.L_eta > 0):
            raise BadParam("L_nu and L_eta must be positive")
        B = self.theta_norm_bound
        if B is None:
            B = math.sqrt(max(self.L_nu / 2.0 - 1.0, 0.0) / self.L_eta)
            object.__setattr__(self, "theta_norm_bound", B)
        if B < 0:
            raise BadParam("theta_norm_bound must be nonnegative")
        if self.L_nu < 2.0 * (self.L_eta * B ** 2 + 1.0) - 1e-9:
            warnings.warn("L_nu is below 2 (L_eta B^2 + 1); intervals may undercover", stacklevel=2)

    @classmethod
    def for_instance(cls, instance, slack=1.0):
        """Tight bounds computed from the simulator's true parameters."""
        B = instance.theta_norm()
        L_eta = instance.noise.L_eta
        return cls(L_nu=slack * 2.0 * (L_eta * B ** 2 + 1.0), L_eta=L_eta, theta_norm_bound=B)


def as_gram(data):
    if isinstance(data, Gram):
        return data
    if isinstance(data, Dataset):
        return data.gram()
    Z = np.atleast_2d(np.asarray(data, dtype=float))
    return Gram(Z.T @ Z, np.zeros_like(Z.T @ Z), np.zeros(Z.shape[1]), Z.shape[0])


def _ztz(Z):
    """``Z^T Z`` from a design matrix, a Dataset or a Gram."""
    if isinstance(Z, (Gram, Dataset)):
        return as_gram(Z).ztz
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return Z.T @ Z


def _require_invertible(M, what):
    if sigma_min(M) <= SINGULAR_TOL * max(1.0, np.abs(M).max()):
        raise SingularDesign(f"{what} is singular")


def fit_gamma_ols(data):
    """First-stage least squares ``(Z^T Z)^{-1} Z^T X``."""
    g = as_gram(data)
    _require_invertible(g.ztz, "Z^T Z")
    return np.linalg.solve(g.ztz, g.ztx)


def estimate_theta_psi(data, psi):
    """Psi-IV estimate ``(Z^T Z Psi)^{-1} Z^T Y``.

    ``psi = I`` is OLS of Y on Z, ``psi = Gamma`` the oracle estimator and
    ``psi = Gamma_hat`` (fit on separate data) the P-2SLS estimator.
    """
    g = as_gram(data)
    M = g.ztz @ np.asarray(psi, dtype=float)
    _require_invertible(M, "Z^T Z Psi")
    return np.linalg.solve(M, g.zty)


def estimate_theta_2sls(data):
    """Textbook just-identified 2SLS ``(Z^T X)^{-1} Z^T Y`` on a single sample."""
    g = as_gram(data)
    _require_invertible(g.ztx, "Z^T X")
    return np.linalg.solve(g.ztx, g.zty)


def estimate_theta_ols(data):
    """Naive regression of Y on the observed treatments X (biased under confounding)."""
    d = data
    if not isinstance(d, Dataset):
        raise TypeError("OLS on X needs the raw dataset")
    xtx = d.X.T @ d.X
    _require_invertible(xtx, "X^T X")
    return np.linalg.solve(xtx, d.X.T @ d.Y)


def sigma_nu_bound(bounds, compliance=False):
    """Sub-Gaussian parameter of ``nu = eta^T theta + eps``."""
    L_eta = 4.0 if compliance else bounds.L_eta
    return 2.0 * (L_eta * bounds.theta_norm_bound ** 2 + 1.0)


def log_bar(Z, delta, d=None, L_z=None, mode=LogBarMode.THEORETICAL):
    """Log factor of the first-stage error term.

    THEORETICAL::

        8 d ln(1 + 2 T L_z^2 / (d m)) + 16 ln(2 6^d / delta * log2(4 / m)^2),
        m = min(2, sigma_min(Z^T Z))

    PRACTICAL: ``4 d + ln(1/delta)``.
    """
    if not 0 < delta <= 1:
        raise BadParam("delta must lie in (0, 1]")
    mode = LogBarMode(mode)
    if isinstance(Z, (Gram, Dataset)):
        g = as_gram(Z)
        ztz, T = g.ztz, g.n
    else:
        Zm = np.atleast_2d(np.asarray(Z, dtype=float))
        ztz, T = Zm.T @ Zm, Zm.shape[0]
    d = ztz.shape[0] if d is None else d
    if mode is LogBarMode.PRACTICAL:
        return 4.0 * d + math.log(1.0 / delta)
    if L_z is None:
        raise BadParam("theoretical log_bar needs L_z")
    m = min(2.0, sigma_min(ztz))
    if m <= 0:
        return math.inf
    first = 8.0 * d * math.log(1.0 + 2.0 * T * L_z ** 2 / (d * m))
    second = 16.0 * (math.log(2.0 / delta) + d * math.log(6.0) + 2.0 * math.log(math.log2(4.0 / m)))
    return first + second


def abar(Z, gamma):
    """``A_bar(Z, Gamma) = Gamma^T Z^T Z Gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    return gamma.T @ _ztz(Z) @ gamma


def _norm_sq_abar_inv(w, Z, gamma):
    try:
        return float(np.max(mahalanobis_sq(w, abar(Z, gamma))))
    except NotPSD as exc:
        raise SingularDesign("A_bar(Z, Gamma) is not positive definite") from exc


def oracle_ci_width(w, Z, gamma, sigma_nu_sq, delta):
    """Half-width ``sqrt(2 sigma_nu^2 ||w||^2_{A_bar^{-1}} log(2/delta))``."""
    if not 0 < delta < 1:
        raise BadParam("delta must lie in (0, 1)")
    return math.sqrt(2.0 * sigma_nu_sq * _norm_sq_abar_inv(w, Z, gamma) * math.log(2.0 / delta))


def p2sls_ci_width(w, Z1, Z2, gamma_hat, bounds, delta, mode=LogBarMode.THEORETICAL, L_z=None):
    """Half-width for ``w^T theta`` around the P-2SLS estimate.

    ``Z1`` is the first-stage design that produced ``gamma_hat``, ``Z2`` the
    second-stage design. The unknown ``||theta||_2`` and noise scales are
    replaced by the bounds in ``bounds``.
    """
    if not 0 < delta < 1:
        raise BadParam("delta must lie in (0, 1)")
    if L_z is None:
        Zm = None if isinstance(Z1, (Gram, Dataset)) else np.atleast_2d(np.asarray(Z1, dtype=float))
        L_z = float(np.max(np.linalg.norm(Zm, axis=1))) if Zm is not None else 1.0
    sampling = math.sqrt(_norm_sq_abar_inv(w, Z2, gamma_hat) * 2.0 * bounds.L_nu * math.log(4.0 / delta))
    if bounds.theta_norm_bound == 0:
        return sampling
    lb = log_bar(Z1, delta / 4.0, d=gamma_hat.shape[0], L_z=L_z, mode=mode)
    approx = math.sqrt(_norm_sq_abar_inv(w, Z1, gamma_hat)) * bounds.theta_norm_bound * math.sqrt(bounds.L_eta * lb)
    return sampling + approx
