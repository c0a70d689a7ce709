"""Quasi-closed-form optimistic likelihood over a KL ball on covariances.

Minimizes L(Sigma) = Tr(S Sigma^-1) + log det Sigma subject to
KL(N(mu, C) || N(mu, Sigma)) <= rho. Strong duality reduces the problem to a
univariate convex dual in the multiplier gamma, solved by safeguarded
Newton. When the scatter is given in factored form S = F F^T with few
columns, the dual derivatives collapse to k-dimensional quantities.

Internally every formula is expressed through the eigenvalues w_i of the
whitened scatter C^{-1/2} S C^{-1/2} (for a factor, the eigenvalues of
F^T C^{-1} F padded with zeros), so one symmetric eigendecomposition per
problem suffices.
"""

from dataclasses import dataclass

import numpy as np

from .spd_core import SpdMatrix, SymMatrix

__all__ = [
    "KlProblem",
    "KlSolution",
    "kl_divergence",
    "dual_derivatives_full",
    "dual_derivatives_lowrank",
    "solve_kl",
    "optimistic_loglik_kl",
]

# convergence thresholds for the safeguarded Newton iteration
_GRAD_TOL_SCALE = 1e-10
_BRACKET_RTOL = 1e-14
_MAX_BRACKET_STEPS = 200
_NEWTON_CAP = 200


class KlProblem:
    """Optimistic likelihood problem over a KL ball.

    Exactly one of ``scatter`` (full symmetric PSD matrix) or ``factor``
    (n x k matrix F with S = F F^T, k >= 1) must be given. The radius is
    in nats and must be positive.
    """

    __slots__ = (
        "nominal",
        "radius",
        "scatter",
        "factor",
        "whitened_eigenvalues",
        "_rank",
    )

    def __init__(self, nominal, radius, scatter=None, factor=None):
        if not isinstance(nominal, SpdMatrix):
            nominal = SpdMatrix(nominal)
        if not (radius > 0):
            raise ValueError("radius must be positive")
        if (scatter is None) == (factor is None):
            raise ValueError("provide exactly one of scatter or factor")
        n = nominal.dim
        if scatter is not None:
            if not isinstance(scatter, SymMatrix):
                scatter = SymMatrix(scatter)
            if scatter.dim != n:
                raise ValueError("scatter dimension %d, nominal %d" % (scatter.dim, n))
            isqrt = _isqrt(nominal)
            white = isqrt @ scatter.entries @ isqrt
            w = np.linalg.eigvalsh(0.5 * (white + white.T))
            if w[0] < -1e-10:
                raise ValueError(
                    "scatter is not positive semidefinite: min eigenvalue %.3e" % w[0]
                )
            w = np.maximum(w, 0.0)
            rank = n
        else:
            factor = np.asarray(factor, dtype=float)
            if factor.ndim != 2 or factor.shape[0] != n:
                raise ValueError("factor must have shape (%d, k)" % n)
            k = factor.shape[1]
            if k < 1:
                raise ValueError("factor needs at least one column")
            if k > n:
                raise ValueError("factor has more columns than rows; pass the full scatter")
            half = _isqrt(nominal) @ factor
            small = half.T @ half
            b = np.maximum(np.linalg.eigvalsh(0.5 * (small + small.T)), 0.0)
            w = np.concatenate([np.zeros(n - k), b])
            rank = k
        self.nominal = nominal
        self.radius = float(radius)
        self.scatter = scatter
        self.factor = factor
        self.whitened_eigenvalues = w
        self._rank = rank

    @property
    def dim(self):
        return self.nominal.dim

    def scatter_entries(self):
        if self.scatter is not None:
            return self.scatter.entries
        return self.factor @ self.factor.T


@dataclass(frozen=True)
class KlSolution:
    """Solution of the KL-ball problem.

    ``gamma_star`` is the ball multiplier (0 when the unconstrained
    optimum is feasible), ``optimizer`` is
    Sigma* = (1+gamma*)^-1 (S + gamma* C), ``kkt_residual`` is the
    absolute dual stationarity residual, and ``constraint_slack`` is
    2 rho minus the constraint value at Sigma* (nonnegative, and zero up
    to tolerance when the constraint is active).
    """

    gamma_star: float
    optimal_value: float
    optimizer: SpdMatrix
    kkt_residual: float
    constraint_slack: float


def _isqrt(m):
    w, q = m.eigenvalues, m.eigenvectors
    return q * (1.0 / np.sqrt(w)) @ q.T


def kl_divergence(cov0, cov1):
    """KL divergence between centered Gaussians with these covariances.

    Returns (1/2)(Tr(Sigma1^-1 Sigma0) + log det(Sigma1 Sigma0^-1) - n).
    Zero exactly when the inputs are equal; not symmetric in general.
    """
    if not isinstance(cov0, SpdMatrix):
        cov0 = SpdMatrix(cov0)
    if not isinstance(cov1, SpdMatrix):
        cov1 = SpdMatrix(cov1)
    if cov0.dim != cov1.dim:
        raise ValueError("dimension mismatch: %d vs %d" % (cov0.dim, cov1.dim))
    isqrt1 = _isqrt(cov1)
    white = isqrt1 @ cov0.entries @ isqrt1
    tr = float(np.trace(white))
    logdet = float(np.sum(np.log(cov1.eigenvalues)) - np.sum(np.log(cov0.eigenvalues)))
    return max(0.5 * (tr + logdet - cov0.dim), 0.0)


def _logdet_nominal(p):
    return float(np.sum(np.log(p.nominal.eigenvalues)))


def dual_derivatives_full(p, gamma):
    """Dual objective g1 and its first two derivatives at ``gamma``.

    g1(gamma) = gamma (2 rho + log det C) + n (1+gamma) log(1+gamma)
                - (1+gamma) log det(S + gamma C).
    """
    if not (gamma > 0):
        raise ValueError("gamma must be positive")
    w = p.whitened_eigenvalues
    n = p.dim
    rho = p.radius
    logdet_c = _logdet_nominal(p)
    gw = gamma + w
    log_sum = float(np.sum(np.log(gw)))
    inv_sum = float(np.sum(1.0 / gw))
    inv2_sum = float(np.sum(1.0 / gw**2))
    g = (
        gamma * (2.0 * rho + logdet_c)
        + n * (1.0 + gamma) * np.log1p(gamma)
        - (1.0 + gamma) * (logdet_c + log_sum)
    )
    gp = 2.0 * rho + n * (np.log1p(gamma) + 1.0) - log_sum - (1.0 + gamma) * inv_sum
    gpp = n / (1.0 + gamma) - 2.0 * inv_sum + (1.0 + gamma) * inv2_sum
    return float(g), float(gp), float(gpp)


def dual_derivatives_lowrank(p, gamma):
    """Dual objective g2 and derivatives through the k x k factor form.

    g2 differs from g1 by the gamma-independent constant log det C, so the
    two share stationary points. All sums run over the k factor
    eigenvalues plus an analytic term for the n-k zeros.
    """
    if p.factor is None:
        raise ValueError("low-rank derivatives require a factor-form problem")
    if not (gamma > 0):
        raise ValueError("gamma must be positive")
    n = p.dim
    k = p._rank
    rho = p.radius
    b = p.whitened_eigenvalues[n - k :]
    gb = gamma + b
    log_sum = float(np.sum(np.log(gb)))
    inv_sum = float(np.sum(1.0 / gb))
    inv2_sum = float(np.sum(1.0 / gb**2))
    zeros = n - k
    g = (
        2.0 * gamma * rho
        + n * (1.0 + gamma) * np.log1p(gamma)
        - zeros * (1.0 + gamma) * np.log(gamma)
        - (1.0 + gamma) * log_sum
    )
    gp = (
        2.0 * rho
        + n * (np.log1p(gamma) + 1.0)
        - zeros * (np.log(gamma) + (1.0 + gamma) / gamma)
        - log_sum
        - (1.0 + gamma) * inv_sum
    )
    gpp = (
        n / (1.0 + gamma)
        - zeros * (1.0 / gamma - 1.0 / gamma**2)
        - 2.0 * inv_sum
        + (1.0 + gamma) * inv2_sum
    )
    return float(g), float(gp), float(gpp)


def _dual_grad(p, gamma):
    if p.factor is not None:
        return dual_derivatives_lowrank(p, gamma)[1:]
    return dual_derivatives_full(p, gamma)[1:]


def _solve_gamma(p):
    """Root of g'(gamma) = 0 by safeguarded Newton on a sign-change bracket."""
    rho = p.radius
    grad_tol = _GRAD_TOL_SCALE * max(1.0, abs(2.0 * rho))

    lo = hi = None
    gamma = 1.0
    gp, gpp = _dual_grad(p, gamma)
    if gp < 0.0:
        for _ in range(_MAX_BRACKET_STEPS):
            lo = gamma
            gamma *= 2.0
            gp, gpp = _dual_grad(p, gamma)
            if gp >= 0.0:
                hi = gamma
                break
        else:
            raise RuntimeError(
                "no sign change in the dual derivative after %d doublings; "
                "the problem violates the solver's assumptions" % _MAX_BRACKET_STEPS
            )
    else:
        for _ in range(_MAX_BRACKET_STEPS):
            hi = gamma
            gamma *= 0.5
            gp, gpp = _dual_grad(p, gamma)
            if gp < 0.0:
                lo = gamma
                break
        else:
            raise RuntimeError(
                "no sign change in the dual derivative after %d halvings; "
                "the nominal matrix itself should have been feasible" % _MAX_BRACKET_STEPS
            )

    gamma = 0.5 * (lo + hi)
    for _ in range(_NEWTON_CAP):
        gp, gpp = _dual_grad(p, gamma)
        if gp < 0.0:
            lo = gamma
        else:
            hi = gamma
        if abs(gp) <= grad_tol or (hi - lo) <= _BRACKET_RTOL * gamma:
            break
        if gpp > 0.0:
            cand = gamma - gp / gpp
            if lo < cand < hi:
                gamma = cand
                continue
        gamma = 0.5 * (lo + hi)
    return gamma


def solve_kl(p):
    """Solve the KL-ball problem, returning a :class:`KlSolution`.

    A positive definite scatter already inside the ball is its own
    optimizer (gamma* = 0). Otherwise the unique positive multiplier is
    located on the dual and the optimizer assembled as
    (1+gamma*)^-1 (S + gamma* C).
    """
    w = p.whitened_eigenvalues
    n = p.dim
    rho = p.radius
    logdet_c = _logdet_nominal(p)

    thresh = n * np.finfo(float).eps * max(float(w[-1]), 1.0)
    if w[0] > thresh:
        constraint = float(np.sum(1.0 / w) + np.sum(np.log(w))) - n
        if constraint <= 2.0 * rho:
            value = n + float(np.sum(np.log(w))) + logdet_c
            return KlSolution(
                gamma_star=0.0,
                optimal_value=value,
                optimizer=SpdMatrix(p.scatter_entries()),
                kkt_residual=0.0,
                constraint_slack=2.0 * rho - constraint,
            )

    gamma = _solve_gamma(p)
    gw = gamma + w
    value = (
        float((1.0 + gamma) * np.sum(w / gw) + np.sum(np.log(gw)))
        + logdet_c
        - n * np.log1p(gamma)
    )
    s_star = gw / (1.0 + gamma)
    constraint = float(np.sum(1.0 / s_star) + np.sum(np.log(s_star))) - n
    optimizer = SpdMatrix(
        (p.scatter_entries() + gamma * p.nominal.entries) / (1.0 + gamma)
    )
    return KlSolution(
        gamma_star=float(gamma),
        optimal_value=value,
        optimizer=optimizer,
        kkt_residual=abs(_dual_grad(p, gamma)[0]),
        constraint_slack=2.0 * rho - constraint,
    )


def optimistic_loglik_kl(observations, mean, nominal_cov, rho):
    """Optimistic Gaussian log-likelihood over a KL ball.

    Builds the scatter from the observations about ``mean`` (in factored
    form whenever M < n) and returns ``(-optimal_value, optimizer)``.
    """
    obs = np.atleast_2d(np.asarray(observations, dtype=float))
    if obs.size == 0:
        raise ValueError("observation list is empty")
    mean = np.asarray(mean, dtype=float)
    if obs.shape[1] != mean.shape[0]:
        raise ValueError(
            "observation dimension %d does not match mean dimension %d"
            % (obs.shape[1], mean.shape[0])
        )
    if not isinstance(nominal_cov, SpdMatrix):
        nominal_cov = SpdMatrix(nominal_cov)
    dev = obs - mean
    m_count = obs.shape[0]
    if m_count < nominal_cov.dim:
        problem = KlProblem(
            nominal_cov, rho, factor=dev.T / np.sqrt(m_count)
        )
    else:
        problem = KlProblem(nominal_cov, rho, scatter=dev.T @ dev / m_count)
    sol = solve_kl(problem)
    return -sol.optimal_value, sol.optimizer


def _optimistic_values_kl_rank1(nominal, rho, deviations):
    """Optimistic values for a batch of single-observation problems.

    ``deviations`` has shape (B, n); problem b has the rank-1 scatter
    dev_b dev_b^T around the shared nominal matrix. The whitened scatter
    has one nonzero eigenvalue m_b, so the dual reduces to a scalar
    Newton iteration vectorized across the batch. Returns the batch of
    optimistic log-likelihood values.
    """
    if not isinstance(nominal, SpdMatrix):
        nominal = SpdMatrix(nominal)
    dev = np.asarray(deviations, dtype=float)
    if dev.ndim != 2 or dev.shape[1] != nominal.dim:
        raise ValueError("deviations must have shape (B, %d)" % nominal.dim)
    n = nominal.dim
    logdet_c = float(np.sum(np.log(nominal.eigenvalues)))
    half = dev @ _isqrt(nominal)
    m = np.einsum("bi,bi->b", half, half)
    grad_tol = _GRAD_TOL_SCALE * max(1.0, abs(2.0 * rho))

    def grad(g):
        gm = g + m
        gp = (
            2.0 * rho
            + n * (np.log1p(g) + 1.0)
            - (np.log(gm) + (n - 1.0) * np.log(g))
            - (1.0 + g) * (1.0 / gm + (n - 1.0) / g)
        )
        gpp = (
            n / (1.0 + g)
            - (2.0 / gm - (1.0 + g) / gm**2)
            - (n - 1.0) * (1.0 / g - 1.0 / g**2)
        )
        return gp, gpp

    # bracket each problem by doubling/halving from gamma = 1
    gamma = np.ones_like(m)
    gp, _ = grad(gamma)
    lo = np.where(gp < 0.0, gamma, np.nan)
    hi = np.where(gp >= 0.0, gamma, np.nan)
    need_hi = gp < 0.0
    step = gamma.copy()
    for _ in range(_MAX_BRACKET_STEPS):
        open_hi = need_hi & np.isnan(hi)
        open_lo = ~need_hi & np.isnan(lo)
        if not (open_hi.any() or open_lo.any()):
            break
        step[open_hi] *= 2.0
        step[open_lo] *= 0.5
        gp, _ = grad(step)
        hi[open_hi & (gp >= 0.0)] = step[open_hi & (gp >= 0.0)]
        lo[open_hi & (gp < 0.0)] = step[open_hi & (gp < 0.0)]
        lo[open_lo & (gp < 0.0)] = step[open_lo & (gp < 0.0)]
        hi[open_lo & (gp >= 0.0)] = step[open_lo & (gp >= 0.0)]
    if np.isnan(lo).any() or np.isnan(hi).any():
        raise RuntimeError("dual bracket not found for a batch problem")

    gamma = 0.5 * (lo + hi)
    done = np.zeros(gamma.shape, dtype=bool)
    for _ in range(_NEWTON_CAP):
        gp, gpp = grad(gamma)
        lo = np.where(gp < 0.0, gamma, lo)
        hi = np.where(gp >= 0.0, gamma, hi)
        done |= (np.abs(gp) <= grad_tol) | ((hi - lo) <= _BRACKET_RTOL * gamma)
        if done.all():
            break
        cand = gamma - gp / np.where(gpp > 0.0, gpp, 1.0)
        bad = (gpp <= 0.0) | (cand <= lo) | (cand >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        gamma = np.where(done, gamma, cand)

    gm = gamma + m
    value = (
        (1.0 + gamma) * m / gm
        + np.log(gm)
        + (n - 1.0) * np.log(gamma)
        + logdet_c
        - n * np.log1p(gamma)
    )
    return -value
