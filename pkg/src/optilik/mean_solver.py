"""Optimistic likelihood with mean ambiguity and fixed covariance.

Minimizes M^-1 sum_m (x_m - mu)^T C^-1 (x_m - mu) + log det C over means
within a Mahalanobis ball of radius rho around the nominal mean. The dual
is a univariate convex problem in the multiplier gamma whose solution
places mu* on the segment between the sample mean and the nominal mean.

With identical covariances the Mahalanobis distance is also the
Fisher-Rao distance between the two Gaussians, and twice the KL
divergence equals its square, so one solver covers both ball types.
"""

import numpy as np

from .spd_core import SpdMatrix

__all__ = [
    "MeanProblem",
    "fr_mean_distance",
    "kl_mean_divergence",
    "solve_mean",
]

_GRAD_TOL = 1e-12
_MAX_BRACKET_STEPS = 200
_NEWTON_CAP = 200


def _as_cov(cov):
    return cov if isinstance(cov, SpdMatrix) else SpdMatrix(cov)


def _weighted_inner(cov, u, v):
    w, q = cov.eigenvalues, cov.eigenvectors
    return float((q.T @ u / w) @ (q.T @ v))


class MeanProblem:
    """Mean-ambiguity problem data.

    ``scatter_about_samples`` caches M^-1 sum_m x_m^T C^-1 x_m, the
    mu-independent part of the objective; :meth:`from_observations`
    computes it from raw samples.
    """

    __slots__ = (
        "nominal_mean",
        "fixed_cov",
        "radius",
        "sample_mean",
        "sample_count",
        "scatter_about_samples",
    )

    def __init__(
        self, nominal_mean, fixed_cov, radius, sample_mean, sample_count,
        scatter_about_samples,
    ):
        nominal_mean = np.asarray(nominal_mean, dtype=float)
        sample_mean = np.asarray(sample_mean, dtype=float)
        fixed_cov = _as_cov(fixed_cov)
        if nominal_mean.ndim != 1 or sample_mean.ndim != 1:
            raise ValueError("means must be vectors")
        if nominal_mean.shape[0] != fixed_cov.dim or sample_mean.shape[0] != fixed_cov.dim:
            raise ValueError("mean dimension does not match covariance")
        if not (radius > 0):
            raise ValueError("radius must be positive")
        if sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        self.nominal_mean = nominal_mean
        self.fixed_cov = fixed_cov
        self.radius = float(radius)
        self.sample_mean = sample_mean
        self.sample_count = int(sample_count)
        self.scatter_about_samples = float(scatter_about_samples)

    @classmethod
    def from_observations(cls, observations, nominal_mean, fixed_cov, radius):
        obs = np.atleast_2d(np.asarray(observations, dtype=float))
        if obs.size == 0:
            raise ValueError("observation list is empty")
        fixed_cov = _as_cov(fixed_cov)
        if obs.shape[1] != fixed_cov.dim:
            raise ValueError("observation dimension does not match covariance")
        w, q = fixed_cov.eigenvalues, fixed_cov.eigenvectors
        white = obs @ q / np.sqrt(w)
        quad = float(np.sum(white * white) / obs.shape[0])
        return cls(
            nominal_mean, fixed_cov, radius, obs.mean(axis=0), obs.shape[0], quad
        )

    @property
    def dim(self):
        return self.fixed_cov.dim


def fr_mean_distance(mu0, mu1, cov):
    """Fisher-Rao distance between Gaussians sharing ``cov``:
    the Mahalanobis distance sqrt((mu0-mu1)^T C^-1 (mu0-mu1))."""
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    cov = _as_cov(cov)
    if mu0.shape != mu1.shape or mu0.shape[0] != cov.dim:
        raise ValueError("dimension mismatch")
    diff = mu0 - mu1
    return float(np.sqrt(max(_weighted_inner(cov, diff, diff), 0.0)))


def kl_mean_divergence(mu0, mu1, cov):
    """KL divergence between Gaussians sharing ``cov``: half the squared
    Mahalanobis distance (symmetric in its mean arguments)."""
    return 0.5 * fr_mean_distance(mu0, mu1, cov) ** 2


def _dual_grad(gamma, rho_sq, a, b, c):
    # h(gamma) = ((2+gamma) mu_hat - x_bar)^T C^-1 (x_bar + gamma mu_hat)
    h = a * gamma**2 + 2.0 * a * gamma + 2.0 * b - c
    gp = (rho_sq - a) + h / (1.0 + gamma) ** 2
    gpp = 2.0 * a / (1.0 + gamma) - 2.0 * h / (1.0 + gamma) ** 3
    return gp, gpp


def solve_mean(p):
    """Solve the mean-ambiguity problem.

    Returns ``(mu_star, gamma_star, optimal_value)``. When the sample
    mean already lies in the ball it is optimal with gamma* = 0;
    otherwise gamma* > 0 is the root of the dual derivative and
    mu* = (1+gamma*)^-1 (x_bar + gamma* mu_hat) sits on the ball
    boundary.
    """
    cov = p.fixed_cov
    mu_hat = p.nominal_mean
    x_bar = p.sample_mean
    rho = p.radius
    a = _weighted_inner(cov, mu_hat, mu_hat)
    b = _weighted_inner(cov, mu_hat, x_bar)
    c = _weighted_inner(cov, x_bar, x_bar)
    dist_sq = max(a - 2.0 * b + c, 0.0)

    if dist_sq <= rho**2:
        gamma = 0.0
        mu_star = x_bar.copy()
    else:
        rho_sq = rho**2
        lo, hi = 0.0, 1.0
        gp, _ = _dual_grad(hi, rho_sq, a, b, c)
        steps = 0
        while gp < 0.0:
            lo, hi = hi, hi * 2.0
            gp, _ = _dual_grad(hi, rho_sq, a, b, c)
            steps += 1
            if steps > _MAX_BRACKET_STEPS:
                raise RuntimeError(
                    "dual derivative stayed negative after %d doublings"
                    % _MAX_BRACKET_STEPS
                )
        gamma = 0.5 * (lo + hi)
        scale = max(1.0, rho_sq, dist_sq)
        for _ in range(_NEWTON_CAP):
            gp, gpp = _dual_grad(gamma, rho_sq, a, b, c)
            if gp < 0.0:
                lo = gamma
            else:
                hi = gamma
            if abs(gp) <= _GRAD_TOL * scale or (hi - lo) <= 1e-15 * max(gamma, 1.0):
                break
            if gpp > 0.0:
                cand = gamma - gp / gpp
                if lo < cand < hi:
                    gamma = cand
                    continue
            gamma = 0.5 * (lo + hi)
        mu_star = (x_bar + gamma * mu_hat) / (1.0 + gamma)

    logdet = float(np.sum(np.log(cov.eigenvalues)))
    value = (
        p.scatter_about_samples
        - 2.0 * _weighted_inner(cov, mu_star, x_bar)
        + _weighted_inner(cov, mu_star, mu_star)
        + logdet
    )
    return mu_star, float(gamma), float(value)
