"""Gamma Gaussian inverse-Wishart (GGIW) object model.

An object density factorizes into a gamma density over the Poisson
measurement rate, a Gaussian over the kinematic state ``[px, py, vx, vy]``
and an inverse-Wishart density over the 2x2 elliptical extent.  The update
here handles measurement sets received through any of the four
propagation paths by linearizing the path-specific measurement function
around the predicted centroid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from . import geometry as geo
from .errors import InvalidState, NumericalFailure

log = logging.getLogger(__name__)

NU_FLOOR = 3.0 + 1e-6
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class MotionConfig:
    """Near-constant-velocity motion with gamma/IW forgetting."""

    dt: float = 0.2
    sigma_x: float = 0.5
    sigma_y: float = 0.5
    epsilon: float = 1.05
    tau0: float = 1.0

    def transition(self) -> np.ndarray:
        return np.kron(np.array([[1.0, self.dt], [0.0, 1.0]]), np.eye(2))

    def noise_gain(self) -> np.ndarray:
        return np.kron(np.array([[self.dt ** 2 / 2.0], [self.dt]]), np.eye(2))

    def process_cov(self) -> np.ndarray:
        g = self.noise_gain()
        return g @ np.diag([self.sigma_x ** 2, self.sigma_y ** 2]) @ g.T


@dataclass(frozen=True)
class SensorNoise:
    sigma_r: float = 0.2
    sigma_phi: float = np.deg2rad(0.5)
    sigma_rdot: float = 0.5
    rho_scale: float = 0.25
    gamma_m: tuple = (1.0, 0.6, 0.6, 0.6)
    trace_correction: str = "exact_at_mean"

    def __post_init__(self):
        g = tuple(float(v) for v in self.gamma_m)
        if len(g) != 4 or g[0] != 1.0 or not all(0.0 < v <= 1.0 for v in g):
            raise ValueError("gamma_m must be 4 values in (0, 1] with gamma_m[0] = 1")
        object.__setattr__(self, "gamma_m", g)
        if self.trace_correction not in ("first_order", "exact_at_mean"):
            raise ValueError("trace_correction must be 'first_order' or 'exact_at_mean'")

    @property
    def r_tilde(self) -> np.ndarray:
        return np.diag([self.sigma_r ** 2, self.sigma_phi ** 2, self.sigma_rdot ** 2])


@dataclass(frozen=True)
class GgiwDensity:
    alpha: float
    beta: float
    mu: np.ndarray
    p_cov: np.ndarray
    nu: float
    v_scale: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float).reshape(4))
        object.__setattr__(self, "p_cov", np.asarray(self.p_cov, dtype=float).reshape(4, 4))
        object.__setattr__(self, "v_scale", np.asarray(self.v_scale, dtype=float).reshape(2, 2))
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidState("gamma parameters must be positive")


def ensure_spd(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Symmetrize; add 1e-9 I once if Cholesky fails; raise on second failure."""
    m = 0.5 * (m + m.T)
    try:
        np.linalg.cholesky(m)
        return m
    except np.linalg.LinAlgError:
        pass
    m = m + 1e-9 * np.eye(m.shape[0])
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"{what} is not positive definite") from exc
    return m


def ggiw_predict(chi: GgiwDensity, cfg: MotionConfig) -> GgiwDensity:
    f = cfg.transition()
    decay = np.exp(-cfg.dt / cfg.tau0)
    nu_p = decay * (chi.nu + 3.0) - 3.0
    if nu_p <= NU_FLOOR:
        nu_p = NU_FLOOR
    return GgiwDensity(
        alpha=chi.alpha / cfg.epsilon,
        beta=chi.beta / cfg.epsilon,
        mu=f @ chi.mu,
        p_cov=ensure_spd(f @ chi.p_cov @ f.T + cfg.process_cov(), "predicted covariance"),
        nu=nu_p,
        v_scale=chi.v_scale * nu_p / chi.nu,
    )


def expected_extent(chi: GgiwDensity) -> np.ndarray:
    if chi.nu <= 3.0:
        raise InvalidState(f"expected extent undefined for nu={chi.nu} <= 3")
    return chi.v_scale / (chi.nu - 3.0)


def ggiw_estimate(chi: GgiwDensity):
    """Point estimate ``(rate, kinematics, extent)``."""
    return chi.alpha / chi.beta, chi.mu.copy(), expected_extent(chi)


def gamma_poisson_log_eta(alpha: float, beta: float, n: int, gamma: float) -> float:
    """Log of the gamma-Poisson predictive probability of ``n`` returns."""
    return float(alpha * np.log(beta) + gammaln(alpha + n) + n * np.log(gamma)
                 - gammaln(alpha) - (alpha + n) * np.log(beta + gamma) - gammaln(n + 1.0))


def measurement_cov(h2: np.ndarray, extent: np.ndarray, noise: SensorNoise) -> np.ndarray:
    """Per-measurement covariance of the path measurement given an extent."""
    r = np.zeros((3, 3))
    r[:2, :2] = noise.rho_scale * h2 @ extent @ h2.T + np.diag([noise.sigma_r ** 2, noise.sigma_phi ** 2])
    r[2, 2] = noise.sigma_rdot ** 2
    return r


def predicted_measurement(chi: GgiwDensity, path: int, radar: geo.RadarState,
                          line: Optional[geo.ReflectorLine]):
    mu = chi.mu
    z = geo.measure_array(path, mu[:2], mu[2:], radar, line)[0]
    jac = geo.measurement_jacobian(path, mu, radar, line)
    return z, jac


def _as_meas_array(meas_set) -> np.ndarray:
    if isinstance(meas_set, np.ndarray):
        z = np.atleast_2d(meas_set).astype(float)
    else:
        z = np.array([m.as_array() if isinstance(m, geo.Measurement) else m for m in meas_set], dtype=float)
        z = np.atleast_2d(z)
    return z


def meas_centroid_scatter(z: np.ndarray):
    """Centroid and scatter of measurements with wrapped azimuth residuals."""
    ref = z[0, 1]
    az_res = geo.wrap_angle(z[:, 1] - ref)
    zbar = z.mean(axis=0)
    zbar[1] = geo.wrap_angle(ref + az_res.mean())
    dev = z - zbar
    dev[:, 1] = geo.wrap_angle(z[:, 1] - zbar[1])
    return zbar, dev.T @ dev


def ggiw_single_meas_density(z, chi: GgiwDensity, path: int, radar: geo.RadarState,
                             noise: SensorNoise, line: Optional[geo.ReflectorLine] = None,
                             extent: Optional[np.ndarray] = None) -> float:
    """Linearized single-measurement density at the density's centroid.

    ``extent`` defaults to the expected extent.
    """
    z = z.as_array() if isinstance(z, geo.Measurement) else np.asarray(z, dtype=float)
    zhat, jac = predicted_measurement(chi, path, radar, line)
    e = expected_extent(chi) if extent is None else np.asarray(extent, dtype=float)
    r = measurement_cov(jac[:2, :2], e, noise)
    d = z - zhat
    d[1] = geo.wrap_angle(d[1])
    sign, logdet = np.linalg.slogdet(r)
    if sign <= 0:
        raise NumericalFailure("measurement covariance not positive definite")
    maha = d @ np.linalg.solve(r, d)
    return float(np.exp(-0.5 * (3 * _LOG_2PI + logdet + maha)))


def _lmvgamma2(a: float) -> float:
    # bivariate log gamma, log(pi)/2 + lgamma(a) + lgamma(a - 1/2)
    return 0.5 * math.log(math.pi) + math.lgamma(a) + math.lgamma(a - 0.5)


def ggiw_update(chi_plus: GgiwDensity, meas_set, path: int,
                reflector: Optional[geo.ReflectorLine], radar: geo.RadarState,
                noise: SensorNoise):
    """Update with one measurement set received via ``path``.

    Returns the posterior density and the log marginal likelihood of the
    set (gamma-Poisson count term included).
    """
    z = _as_meas_array(meas_set)
    n = z.shape[0]
    if n < 1:
        raise ValueError("measurement set must be non-empty")
    e_bar = expected_extent(chi_plus)
    zhat, jac = predicted_measurement(chi_plus, path, radar, reflector)
    h2 = jac[:2, :2]
    if abs(np.linalg.det(h2)) < 1e-14 or np.linalg.cond(h2) > 1e12:
        raise NumericalFailure("position block of the measurement Jacobian is singular")
    h2_inv = np.linalg.inv(h2)
    gamma = noise.gamma_m[path]

    zbar, scatter = meas_centroid_scatter(z)
    innov = zbar - zhat
    innov[1] = geo.wrap_angle(innov[1])

    r_bar = measurement_cov(h2, e_bar, noise)
    lam = jac @ chi_plus.p_cov @ jac.T + r_bar / n
    try:
        lam_chol = np.linalg.cholesky(0.5 * (lam + lam.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("innovation covariance not positive definite") from exc
    gain = np.linalg.solve(lam.T, (chi_plus.p_cov @ jac.T).T).T
    mu_w = chi_plus.mu + gain @ innov
    p_w = ensure_spd(chi_plus.p_cov - gain @ lam @ gain.T, "posterior covariance")

    nu_w = chi_plus.nu + n - 1.0
    if nu_w <= NU_FLOOR:
        log.warning("nu clamped from %.6g to %.6g", nu_w, NU_FLOOR)
        nu_w = NU_FLOOR
    v_w = ensure_spd(chi_plus.v_scale + h2_inv @ scatter[:2, :2] @ h2_inv.T / noise.rho_scale,
                     "posterior scale matrix")

    # log marginal: gamma-Poisson, predicted centroid, extent/noise determinant
    # ratio and inverse-Wishart normalizer terms
    log_eta_gamma = gamma_poisson_log_eta(chi_plus.alpha, chi_plus.beta, n, gamma)
    white = np.linalg.solve(lam_chol, innov)
    log_eta_z = -0.5 * (3 * _LOG_2PI + 2.0 * np.sum(np.log(np.diag(lam_chol))) + white @ white)

    sr2, sp2, sd2 = noise.sigma_r ** 2, noise.sigma_phi ** 2, noise.sigma_rdot ** 2
    e_inv = np.linalg.inv(e_bar)
    log_eta_r = np.log(sr2 * sp2 * sd2) + np.linalg.slogdet(
        e_inv + noise.rho_scale * h2.T @ np.diag([1.0 / sr2, 1.0 / sp2]) @ h2)[1]

    e_breve = noise.rho_scale * h2 @ e_bar @ h2.T
    eb_inv = np.linalg.inv(e_breve)
    omega = np.zeros((3, 3))
    if noise.trace_correction == "first_order":
        omega[:2, :2] = eb_inv @ np.diag([sr2, sp2]) @ eb_inv
    else:
        # all Neumann terms summed at the expected extent
        omega[:2, :2] = eb_inv - np.linalg.inv(e_breve + np.diag([sr2, sp2]))
    omega[2, 2] = -1.0 / sd2
    log_eta_iw = (1.5 * (1 - n) * _LOG_2PI + (n - 1) * np.log(2.0)
                  + 0.5 * chi_plus.nu * np.linalg.slogdet(chi_plus.v_scale)[1]
                  + _lmvgamma2(0.5 * nu_w)
                  - 0.5 * nu_w * np.linalg.slogdet(v_w)[1]
                  - _lmvgamma2(0.5 * chi_plus.nu)
                  + 0.5 * np.trace(scatter @ omega))

    # n^{-3/2} from N(zbar; h, R/n): the product-of-Gaussians identity needs it
    log_marginal = (log_eta_gamma + log_eta_z + 0.5 * (1 - n) * log_eta_r + log_eta_iw
                    - 1.5 * np.log(n))
    post = GgiwDensity(
        alpha=chi_plus.alpha + n,
        beta=chi_plus.beta + gamma,
        mu=mu_w,
        p_cov=p_w,
        nu=nu_w,
        v_scale=v_w,
    )
    return post, float(log_marginal)


def ggiw_update_sets(chi_plus: GgiwDensity, sets: Sequence, paths: Sequence[int],
                     lines: Sequence[Optional[geo.ReflectorLine]], radar: geo.RadarState,
                     noise: SensorNoise):
    """Sequentially update with several (set, path, reflector) triples."""
    total = 0.0
    chi = chi_plus
    for w, m, line in zip(sets, paths, lines):
        chi, lm = ggiw_update(chi, w, m, line, radar, noise)
        total += lm
    return chi, total

