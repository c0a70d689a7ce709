"""Projected geodesic gradient descent for the Fisher-Rao optimistic likelihood.

Minimizes L(Sigma) = Tr(S Sigma^-1) + log det Sigma over a Fisher-Rao ball
around a nominal covariance matrix. The problem is geodesically convex, and
the solver follows the projected geodesic descent recursion: a gradient step
along the exponential map, a metric projection back onto the ball, and a
geodesic averaging step that produces the reported iterate.

Internally all iterates live in coordinates whitened by the ball center
(Y = C^{-1/2} Sigma C^{-1/2}), where the ball is centered at the identity and
the projection acts directly on eigenvalues. Exponential-map steps, the
projection, and objective evaluations each reduce to one symmetric
eigendecomposition.
"""

from dataclasses import dataclass

import numpy as np

from .fr_geometry import FrBall
from .spd_core import SpdMatrix, SymMatrix, _entries_of

__all__ = [
    "FrProblem",
    "FrSolverOptions",
    "SolveReport",
    "SolverBreakdownError",
    "objective",
    "riemannian_gradient",
    "theorem2_constants",
    "smoothness_constants",
    "solve",
    "optimistic_loglik_fr",
]

_STEP_MODES = ("theorem2_constant", "fixed", "armijo_backtracking")

# Armijo sufficient-decrease constant and halving cap
_ARMIJO_C = 1e-4
_MAX_HALVINGS = 60

# slack for the per-iterate eigenvalue sandwich check
_SANDWICH_SLACK = 1e-8


class SolverBreakdownError(RuntimeError):
    """Numerical breakdown inside the descent loop.

    Carries the last feasible iterate (as an ndarray in original
    coordinates) in the ``last_iterate`` attribute.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class FrProblem:
    """Fisher-Rao optimistic likelihood problem.

    Parameters
    ----------
    ball : FrBall
        Feasible region: covariance matrices within ``radius`` of the
        nominal matrix.
    scatter : SymMatrix or array_like
        Sample covariance of the observations about the nominal mean,
        positive semidefinite up to roundoff (eigenvalues >= -1e-10).
    """

    __slots__ = ("ball", "scatter", "scatter_eigenvalues")

    def __init__(self, ball, scatter):
        if not isinstance(ball, FrBall):
            raise TypeError("ball must be an FrBall")
        if not isinstance(scatter, SymMatrix):
            scatter = SymMatrix(scatter)
        if scatter.dim != ball.dim:
            raise ValueError(
                "dimension mismatch: scatter %d vs ball %d" % (scatter.dim, ball.dim)
            )
        eigs = np.linalg.eigvalsh(scatter.entries)
        if eigs[0] < -1e-10:
            raise ValueError(
                "scatter is not positive semidefinite: min eigenvalue %.3e" % eigs[0]
            )
        self.ball = ball
        self.scatter = scatter
        self.scatter_eigenvalues = eigs

    @property
    def dim(self):
        return self.ball.dim


@dataclass(frozen=True)
class FrSolverOptions:
    """Options for :func:`solve`.

    Attributes
    ----------
    max_iterations : int
        Iteration budget K; the descent performs at most K - 1 steps.
    step_mode : str
        One of ``theorem2_constant`` (constant step from the convergence
        guarantee, computed for K), ``fixed`` (constant ``step_size``), or
        ``armijo_backtracking`` (halving line search from 1/beta with
        sufficient-decrease constant 1e-4).
    step_size : float or None
        Step size for ``fixed`` mode.
    relative_improvement_tol : float
        Stop when |[L(Sigma_{k+1}) - L(Sigma_k)] / L(Sigma_{k+1})| falls
        below this value, measured on the raw iterates.
    jitter : float
        Nonnegative value added to the scatter diagonal before solving.
    finish_averaging : bool
        After the raw sequence stops early, apply the remaining averaging
        steps toward the final raw iterate in closed form (a stalled line
        search leaves the raw iterate fixed, so the leftover recursion is a
        single geodesic contraction by factor 1 - (k0+1)/K). Off by default.
    record_averaged_objective : bool
        Also record the objective of the averaged iterate each iteration
        (costs an extra eigendecomposition per step).
    """

    max_iterations: int = 1000
    step_mode: str = "theorem2_constant"
    step_size: float = None
    relative_improvement_tol: float = 1e-4
    jitter: float = 0.0
    finish_averaging: bool = False
    record_averaged_objective: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.step_mode not in _STEP_MODES:
            raise ValueError("step_mode must be one of %s" % (_STEP_MODES,))
        if self.step_mode == "fixed":
            if self.step_size is None or not (self.step_size > 0):
                raise ValueError("fixed step mode requires a positive step_size")
        if not (self.relative_improvement_tol > 0):
            raise ValueError("relative_improvement_tol must be positive")
        if self.jitter < 0:
            raise ValueError("jitter must be nonnegative")


@dataclass
class SolveReport:
    """Result of :func:`solve`.

    ``optimum`` is the averaged iterate that the descent reports;
    ``best_iterate`` is the feasible raw iterate with the lowest objective
    encountered. ``objective_trace[k]`` records the raw-iterate objective
    L(Sigma_{k+1}); the averaged objective is recorded only on request.
    """

    optimum: SpdMatrix
    objective_trace: np.ndarray
    iterations_used: int
    termination: str
    final_ball_residual: float
    theorem2_bound: float
    best_objective: float
    best_iterate: SpdMatrix
    averaged_objective_trace: np.ndarray = None


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _whiten_scatter(ball, scatter_entries):
    return _sym(ball.center_isqrt @ scatter_entries @ ball.center_isqrt)


def _center_logdet(ball):
    return float(np.sum(np.log(ball.center.eigenvalues)))


def _geodesic_entries(a, b, t):
    """Geodesic point between raw SPD arrays, for the averaging recursion."""
    w, q = np.linalg.eigh(a)
    sq = np.sqrt(w)
    root = q * sq @ q.T
    iroot = q * (1.0 / sq) @ q.T
    s, v = np.linalg.eigh(_sym(iroot @ b @ iroot))
    mid = v * s**t @ v.T
    return _sym(root @ _sym(mid) @ root)


def _spd_from_whitened(ball, y_entries):
    out = _sym(ball.center_sqrt @ y_entries @ ball.center_sqrt)
    lo = ball.center.eigenvalues[0] * np.exp(-np.sqrt(2.0) * ball.radius)
    return SpdMatrix(out, floor=min(1e-12, 0.5 * lo))


def objective(p, sigma):
    """Objective L(Sigma) = Tr(S Sigma^-1) + log det Sigma."""
    if not isinstance(sigma, SpdMatrix):
        sigma = SpdMatrix(sigma)
    if sigma.dim != p.dim:
        raise ValueError("dimension mismatch")
    w, q = sigma.eigenvalues, sigma.eigenvectors
    proj = q.T @ p.scatter.entries @ q
    return float(np.sum(np.diagonal(proj) / w) + np.sum(np.log(w)))


def riemannian_gradient(p, sigma):
    """Riemannian gradient of L at ``sigma``: 2 (Sigma - S).

    Obtained from the Euclidean gradient through the Fisher-Rao metric;
    vanishes exactly at Sigma = S.
    """
    entries = sigma.entries if isinstance(sigma, SpdMatrix) else _entries_of(sigma)
    return SymMatrix(2.0 * (entries - p.scatter.entries))


def _theorem2_from_stats(n, rho, lam_min_center, lam_max_scatter, K):
    root2 = np.sqrt(2.0)
    gamma = (
        2.0 ** (-0.5)
        * np.sqrt(n)
        * np.exp(2.0 * root2 * rho)
        * lam_min_center**-2
        * max(abs(1.0 - np.exp(root2 * rho) * lam_max_scatter / lam_min_center), 1.0)
    )
    th = np.tanh(2.0 * root2 * rho)
    alpha = 2.0**0.25 * np.sqrt(rho * th) / (gamma * np.sqrt(K))
    bound = 2.0 ** (7.0 / 4.0) * rho**1.5 * gamma / np.sqrt(K * th)
    return float(gamma), float(alpha), float(bound)


def theorem2_constants(p, K):
    """Constant-step schedule and convergence bound for a K-iteration run.

    Returns ``(gamma_cap, step, bound)`` where ``gamma_cap`` bounds the
    gradient metric norm on the ball (up to a factor sqrt(2)), ``step`` is
    the constant step size, and ``bound`` bounds the averaged iterate's
    suboptimality L(Sigma_bar_K) - L*.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    rho = p.ball.radius
    if rho == 0.0:
        raise ValueError(
            "degenerate ball: the constant-step schedule is undefined at rho=0 "
            "(the solver short-circuits to the center)"
        )
    return _theorem2_from_stats(
        p.dim,
        rho,
        float(p.ball.center.eigenvalues[0]),
        float(p.scatter_eigenvalues[-1]),
        K,
    )


def smoothness_constants(p):
    """Geodesic smoothness beta and, for positive definite scatter, strong
    convexity sigma of the objective on the ball.

    Returns ``(beta, sigma)`` with ``sigma=None`` when the scatter is
    singular.
    """
    rho = p.ball.radius
    root2 = np.sqrt(2.0)
    lam_s = p.scatter_eigenvalues
    lam_c = p.ball.center.eigenvalues
    beta = 2.0 * lam_s[-1] / (lam_c[0] * np.exp(-root2 * rho))
    thresh = p.dim * np.finfo(float).eps * max(lam_s[-1], 0.0)
    if lam_s[0] > thresh:
        sigma = 2.0 * lam_s[0] / (lam_c[-1] * np.exp(root2 * rho))
        return float(beta), float(sigma)
    return float(beta), None


def _project_eigs(log_t, rho):
    """Projection exponent q for whitened eigenvalues with log spectrum log_t."""
    rho_prime = np.sqrt(0.5 * np.sum(log_t**2, axis=-1))
    if np.ndim(rho_prime) == 0:
        q = 1.0 if rho_prime <= rho * (1.0 + 1e-12) else rho / rho_prime
        return q, float(rho_prime)
    q = np.where(rho_prime <= rho * (1.0 + 1e-12), 1.0, rho / np.maximum(rho_prime, 1e-300))
    return q, rho_prime


def solve(p, opts=None):
    """Run the projected geodesic descent on an FrProblem.

    Starts both the raw and the averaged sequence at the ball center. Each
    iteration takes an exponential-map step along the negative gradient,
    projects back onto the ball, and updates the averaged iterate along the
    geodesic toward the new raw iterate with weight 1/(k+1). Stops when the
    relative improvement of the raw objective falls below the tolerance
    (a stalled line search counts as zero improvement) or when the
    iteration budget is exhausted. Every iterate satisfies the eigenvalue
    sandwich lambda_min(C) e^{-sqrt(2) rho} <= lambda <= lambda_max(C)
    e^{sqrt(2) rho}; a violation aborts with the last feasible iterate.

    Returns a :class:`SolveReport` whose ``optimum`` is the averaged
    iterate.
    """
    if opts is None:
        opts = FrSolverOptions()
    ball = p.ball
    n = p.dim
    rho = ball.radius
    logdet_c = _center_logdet(ball)

    s_entries = p.scatter.entries
    if opts.jitter > 0.0:
        s_entries = s_entries + opts.jitter * np.eye(n)
    s_t = _whiten_scatter(ball, s_entries)

    # L(center): whitened center is the identity
    l_init = float(np.trace(s_t)) + logdet_c

    if rho == 0.0:
        center = ball.center
        return SolveReport(
            optimum=center,
            objective_trace=np.array([l_init]),
            iterations_used=0,
            termination="tolerance",
            final_ball_residual=0.0,
            theorem2_bound=None,
            best_objective=l_init,
            best_iterate=center,
        )

    K = opts.max_iterations
    bound = None
    alpha_const = None
    alpha0 = None
    if opts.step_mode == "theorem2_constant":
        lam_s_max = float(np.linalg.eigvalsh(s_entries)[-1])
        _, alpha_const, bound = _theorem2_from_stats(
            n, rho, float(ball.center.eigenvalues[0]), lam_s_max, K
        )
    elif opts.step_mode == "fixed":
        alpha_const = opts.step_size
    else:
        lam_s_max = float(np.linalg.eigvalsh(s_entries)[-1])
        beta = 2.0 * lam_s_max / (ball.center.eigenvalues[0] * np.exp(-np.sqrt(2.0) * rho))
        alpha0 = 1.0 / beta if beta > 0.0 else 1.0

    sandwich_lo = np.exp(-np.sqrt(2.0) * rho) - _SANDWICH_SLACK
    sandwich_hi = np.exp(np.sqrt(2.0) * rho) + _SANDWICH_SLACK

    # whitened state: Y = I with its trivial eigendecomposition
    eye = np.eye(n)
    y = eye.copy()
    w = np.ones(n)
    q = eye.copy()
    ybar = eye.copy()

    l_cur = l_init
    trace = [l_cur]
    avg_trace = [l_cur] if opts.record_averaged_objective else None
    best_l = l_cur
    best_y = y
    termination = "max_iter"
    steps = 0

    def eval_candidate(z, u, alpha):
        """Project the trial point and evaluate the objective there."""
        e = _sym(z * np.exp(-alpha * u) @ z.T)
        t, v = np.linalg.eigh(e)
        if t[0] <= 0.0 or not np.all(np.isfinite(t)):
            return None
        log_t = np.log(t)
        q_pow, _ = _project_eigs(log_t, rho)
        w_new = np.exp(q_pow * log_t)
        proj = v.T @ s_t @ v
        l_new = float(np.sum(np.diagonal(proj) / w_new) + q_pow * np.sum(log_t)) + logdet_c
        return l_new, w_new, v

    for k in range(1, K):
        g = 2.0 * (y - s_t)
        m = (q.T @ g @ q) / np.sqrt(np.outer(w, w))
        u, u_hat = np.linalg.eigh(_sym(m))
        z = q * np.sqrt(w) @ u_hat

        accepted = None
        if opts.step_mode == "armijo_backtracking":
            # sufficient decrease is measured against the projected
            # displacement, not the raw gradient norm, so steps truncated
            # by the ball projection are still accepted
            alpha = alpha0
            for _ in range(_MAX_HALVINGS + 1):
                cand = eval_candidate(z, u, alpha)
                if cand is not None:
                    r = (q.T @ cand[2]) / np.sqrt(w)[:, None]
                    lam = np.linalg.eigvalsh(_sym(r * cand[1] @ r.T))
                    dist_sq = 0.5 * float(
                        np.sum(np.log(np.maximum(lam, 1e-300)) ** 2)
                    )
                    if cand[0] <= l_cur - _ARMIJO_C * dist_sq / alpha:
                        accepted = cand
                        break
                alpha *= 0.5
            if accepted is None:
                termination = "tolerance"  # line search found no finite step
                break
        else:
            accepted = eval_candidate(z, u, alpha_const)
            if accepted is None:
                raise SolverBreakdownError(
                    "non-finite trial point at iteration %d" % k,
                    last_iterate=_sym(ball.center_sqrt @ y @ ball.center_sqrt),
                )

        l_new, w, q = accepted
        if w[0] < sandwich_lo or w[-1] > sandwich_hi:
            raise SolverBreakdownError(
                "iterate left the eigenvalue sandwich at iteration %d" % k,
                last_iterate=_sym(ball.center_sqrt @ y @ ball.center_sqrt),
            )
        y = _sym(q * w @ q.T)
        steps = k
        trace.append(l_new)
        if l_new < best_l:
            best_l = l_new
            best_y = y

        ybar = _geodesic_entries(ybar, y, 1.0 / (k + 1.0))
        if opts.record_averaged_objective:
            wb, qb = np.linalg.eigh(ybar)
            projb = qb.T @ s_t @ qb
            avg_trace.append(
                float(np.sum(np.diagonal(projb) / wb) + np.sum(np.log(wb))) + logdet_c
            )

        rel = abs(l_new - l_cur) / max(abs(l_new), 1e-300)
        l_cur = l_new
        if rel < opts.relative_improvement_tol:
            termination = "tolerance"
            break

    if opts.finish_averaging and termination == "tolerance" and steps + 1 < K:
        # remaining averaging steps toward the fixed raw iterate compose into
        # one geodesic contraction: prod_{j=k0+1}^{K-1} j/(j+1) = (k0+1)/K
        ybar = _geodesic_entries(ybar, y, 1.0 - (steps + 1.0) / K)

    optimum = _spd_from_whitened(ball, ybar)
    wbar = np.linalg.eigvalsh(_sym(ball.center_isqrt @ optimum.entries @ ball.center_isqrt))
    residual = max(0.0, float(np.sqrt(0.5 * np.sum(np.log(wbar) ** 2))) - rho)
    return SolveReport(
        optimum=optimum,
        objective_trace=np.asarray(trace),
        iterations_used=steps,
        termination=termination,
        final_ball_residual=residual,
        theorem2_bound=bound,
        best_objective=best_l,
        best_iterate=_spd_from_whitened(ball, best_y),
        averaged_objective_trace=None if avg_trace is None else np.asarray(avg_trace),
    )


def _scatter_from_observations(observations, mean):
    obs = np.atleast_2d(np.asarray(observations, dtype=float))
    if obs.size == 0:
        raise ValueError("observation list is empty")
    mean = np.asarray(mean, dtype=float)
    if obs.shape[1] != mean.shape[0]:
        raise ValueError(
            "observation dimension %d does not match mean dimension %d"
            % (obs.shape[1], mean.shape[0])
        )
    dev = obs - mean
    return dev.T @ dev / obs.shape[0]


def optimistic_loglik_fr(observations, mean, nominal_cov, rho, options=None):
    """Optimistic Gaussian log-likelihood over a Fisher-Rao ball.

    Builds the scatter S = M^-1 sum_m (x_m - mean)(x_m - mean)^T, minimizes
    L over the ball of radius ``rho`` around ``nominal_cov``, and returns
    ``(-L(Sigma*), Sigma*)`` where Sigma* is the best-objective feasible
    iterate. ``rho = 0`` returns the nominal log-likelihood exactly.
    """
    if not isinstance(nominal_cov, SpdMatrix):
        nominal_cov = SpdMatrix(nominal_cov)
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    scatter = SymMatrix(_scatter_from_observations(observations, mean))
    ball = FrBall(nominal_cov, rho)
    problem = FrProblem(ball, scatter)
    if rho == 0.0:
        return -objective(problem, nominal_cov), nominal_cov
    report = solve(problem, options)
    return -report.best_objective, report.best_iterate


def _optimistic_values_fr_batch(ball, deviations, opts):
    """Optimistic log-likelihood values for a batch of rank-1 problems.

    ``deviations`` has shape (B, n); problem b has scatter
    dev_b dev_b^T and shares ``ball``. Runs the same descent as
    :func:`solve` on all problems in lockstep (mirroring its Armijo
    schedule and stopping rule) and returns the best objective value per
    problem, negated. Used by the classification rules, where each test
    point is one rank-1 problem.
    """
    dev = np.asarray(deviations, dtype=float)
    if dev.ndim != 2 or dev.shape[1] != ball.dim:
        raise ValueError("deviations must have shape (B, %d)" % ball.dim)
    b_count, n = dev.shape
    rho = ball.radius
    logdet_c = _center_logdet(ball)
    dev_w = dev @ ball.center_isqrt
    s_t = dev_w[:, :, None] * dev_w[:, None, :]
    l_init = np.einsum("bi,bi->b", dev_w, dev_w) + logdet_c
    if rho == 0.0:
        return -l_init

    if opts.jitter > 0.0:
        s_full = dev[:, :, None] * dev[:, None, :] + opts.jitter * np.eye(n)
        s_t = _sym(
            np.einsum("ij,bjk,kl->bil", ball.center_isqrt, s_full, ball.center_isqrt)
        )
        l_init = np.einsum("bii->b", s_t) + logdet_c
        lam_s_max = np.linalg.eigvalsh(s_full)[:, -1]
    else:
        lam_s_max = np.einsum("bi,bi->b", dev, dev)

    K = opts.max_iterations
    if opts.step_mode == "armijo_backtracking":
        beta = 2.0 * lam_s_max / (ball.center.eigenvalues[0] * np.exp(-np.sqrt(2.0) * rho))
        alpha0 = np.where(beta > 0.0, 1.0 / np.maximum(beta, 1e-300), 1.0)
    elif opts.step_mode == "fixed":
        alpha0 = np.full(b_count, opts.step_size)
    else:
        alpha0 = np.array(
            [
                _theorem2_from_stats(
                    n, rho, float(ball.center.eigenvalues[0]), float(s), K
                )[1]
                for s in lam_s_max
            ]
        )

    eye = np.eye(n)
    y = np.broadcast_to(eye, (b_count, n, n)).copy()
    w = np.ones((b_count, n))
    q = y.copy()
    l_cur = l_init.copy()
    best_l = l_cur.copy()
    active = np.ones(b_count, dtype=bool)

    for _ in range(1, K):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        wa, qa, ya, sa = w[idx], q[idx], y[idx], s_t[idx]
        g = 2.0 * (ya - sa)
        m = _sym(np.einsum("bji,bjk,bkl->bil", qa, g, qa) / np.sqrt(wa[:, :, None] * wa[:, None, :]))
        u, u_hat = np.linalg.eigh(m)
        z = np.einsum("bij,bj,bjk->bik", qa, np.sqrt(wa), u_hat)

        alpha = alpha0[idx].copy()
        done = np.zeros(idx.size, dtype=bool)
        w_new = np.empty_like(wa)
        q_new = np.empty_like(qa)
        l_new = np.empty(idx.size)
        if opts.step_mode != "armijo_backtracking":
            done_rounds = 1
        else:
            done_rounds = _MAX_HALVINGS + 1
        for _round in range(done_rounds):
            todo = np.flatnonzero(~done)
            if todo.size == 0:
                break
            zt, ut, at = z[todo], u[todo], alpha[todo]
            e = _sym(zt * np.exp(-at[:, None] * ut)[:, None, :] @ np.swapaxes(zt, -1, -2))
            t, v = np.linalg.eigh(e)
            log_t = np.log(np.maximum(t, 1e-300))
            q_pow, _ = _project_eigs(log_t, rho)
            wt = np.exp(q_pow[:, None] * log_t)
            proj = np.einsum("bji,bjk,bki->bi", v, s_t[idx[todo]], v)
            lt = np.sum(proj / wt, axis=-1) + q_pow * np.sum(log_t, axis=-1) + logdet_c
            if opts.step_mode == "armijo_backtracking":
                # projected-displacement sufficient decrease, as in solve()
                r = np.swapaxes(qa[todo], -1, -2) @ v / np.sqrt(wa[todo])[:, :, None]
                a_mat = _sym(r * wt[:, None, :] @ np.swapaxes(r, -1, -2))
                lam = np.linalg.eigvalsh(a_mat)
                dist_sq = 0.5 * np.sum(
                    np.log(np.maximum(lam, 1e-300)) ** 2, axis=-1
                )
                ok = lt <= l_cur[idx[todo]] - _ARMIJO_C * dist_sq / at
            else:
                ok = np.ones(todo.size, dtype=bool)
            hit = todo[ok]
            w_new[hit] = wt[ok]
            q_new[hit] = v[ok]
            l_new[hit] = lt[ok]
            done[hit] = True
            alpha[todo[~ok]] *= 0.5
        stalled = ~done
        moved = idx[done]
        w[moved] = w_new[done]
        q[moved] = q_new[done]
        y[moved] = _sym(
            q_new[done] * w_new[done][:, None, :] @ np.swapaxes(q_new[done], -1, -2)
        )
        rel = np.abs(l_new[done] - l_cur[moved]) / np.maximum(np.abs(l_new[done]), 1e-300)
        l_cur[moved] = l_new[done]
        best_l[moved] = np.minimum(best_l[moved], l_new[done])
        frozen = moved[rel < opts.relative_improvement_tol]
        active[frozen] = False
        active[idx[stalled]] = False

    return -best_l
