"""Fisher-Rao geometry on the manifold of symmetric positive definite matrices.

Implements, for fixed-mean Gaussian distributions parametrized by their
covariance matrix: the Fisher-Rao distance, geodesics, the affine-invariant
metric, the exponential and logarithm maps, and the metric projection onto a
Fisher-Rao ball. The manifold is Hadamard (non-positive curvature), so
geodesics between any two points are unique.
"""

import numpy as np

from .spd_core import SpdMatrix, SymMatrix, _entries_of

__all__ = [
    "FrBall",
    "fr_distance",
    "geodesic",
    "metric_inner",
    "exp_map",
    "log_map",
    "project_fr_ball",
]

# relative slack of the inside-ball test used by the projection
_BOUNDARY_RTOL = 1e-12


def _as_spd(m, name="matrix"):
    if isinstance(m, SpdMatrix):
        return m
    return SpdMatrix(m)


def _check_dims(a, b):
    if a.dim != b.dim:
        raise ValueError("dimension mismatch: %d vs %d" % (a.dim, b.dim))


def _sqrt_pair(m):
    """Matrix square root and inverse square root from the cached spectrum."""
    w, q = m.eigenvalues, m.eigenvectors
    r = np.sqrt(w)
    half = q * r @ q.T
    ihalf = q * (1.0 / r) @ q.T
    return 0.5 * (half + half.T), 0.5 * (ihalf + ihalf.T)


class FrBall:
    """Fisher-Rao ball of covariance matrices around a nominal center.

    Parameters
    ----------
    center : SpdMatrix or array_like
        Nominal covariance matrix.
    radius : float
        Nonnegative radius in Fisher-Rao distance units.

    Notes
    -----
    The square roots ``center^{1/2}`` and ``center^{-1/2}`` are computed
    eagerly at construction and cached, since the projection runs once per
    solver iteration.
    """

    __slots__ = ("center", "radius", "center_sqrt", "center_isqrt")

    def __init__(self, center, radius):
        radius = float(radius)
        if not (radius >= 0.0):
            raise ValueError("radius must be nonnegative, got %r" % radius)
        self.center = _as_spd(center, "center")
        self.radius = radius
        half, ihalf = _sqrt_pair(self.center)
        half.setflags(write=False)
        ihalf.setflags(write=False)
        self.center_sqrt = half
        self.center_isqrt = ihalf

    @property
    def dim(self):
        return self.center.dim

    def __repr__(self):
        return "FrBall(dim=%d, radius=%g)" % (self.dim, self.radius)


def _log_eigs_whitened(a, b):
    """Eigenvalues of b^{-1/2} a b^{-1/2}, for SpdMatrix a, b."""
    _, ihalf = _sqrt_pair(b)
    inner = ihalf @ a.entries @ ihalf
    return np.linalg.eigvalsh(0.5 * (inner + inner.T))


def fr_distance(a, b):
    """Fisher-Rao distance between two SPD matrices.

    .. math:: d(A, B) = \\frac{1}{\\sqrt{2}}\\|\\log(B^{-1/2} A B^{-1/2})\\|_F

    The distance is symmetric and invariant under joint inversion and joint
    congruence transformations of its arguments.
    """
    a = _as_spd(a, "a")
    b = _as_spd(b, "b")
    _check_dims(a, b)
    w = _log_eigs_whitened(a, b)
    return float(np.sqrt(0.5 * np.sum(np.log(w) ** 2)))


def geodesic(a, b, t):
    """Point at parameter ``t`` on the geodesic from ``a`` to ``b``.

    .. math:: \\gamma(t) = A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}

    ``t`` must lie in [0, 1]; the curve has constant speed, with
    ``gamma(0) = a`` and ``gamma(1) = b``.
    """
    t = float(t)
    if not (0.0 <= t <= 1.0):
        raise ValueError("geodesic parameter t=%r outside [0, 1]" % t)
    a = _as_spd(a, "a")
    b = _as_spd(b, "b")
    _check_dims(a, b)
    half, ihalf = _sqrt_pair(a)
    inner = ihalf @ b.entries @ ihalf
    w, q = np.linalg.eigh(0.5 * (inner + inner.T))
    mid = q * w**t @ q.T
    out = half @ (0.5 * (mid + mid.T)) @ half
    return SpdMatrix(0.5 * (out + out.T))


def metric_inner(base, v, w):
    """Fisher-Rao metric on the tangent space at ``base``.

    .. math:: \\langle V, W \\rangle_\\Sigma
              = \\tfrac{1}{2}\\mathrm{Tr}(V \\Sigma^{-1} W \\Sigma^{-1})

    Bilinear, symmetric, and positive definite in ``v``.
    """
    base = _as_spd(base, "base")
    ev = _entries_of(v, "v")
    ew = _entries_of(w, "w")
    if ev.shape != (base.dim, base.dim) or ew.shape != (base.dim, base.dim):
        raise ValueError("tangent vector dimensions do not match the base point")
    lam, q = base.eigenvalues, base.eigenvectors
    # whiten both tangent vectors: Sigma^{-1/2} V Sigma^{-1/2} in the eigenbasis
    vt = (q.T @ ev @ q) / np.sqrt(np.outer(lam, lam))
    wt = (q.T @ ew @ q) / np.sqrt(np.outer(lam, lam))
    return float(0.5 * np.einsum("ij,ij->", vt, wt))


def exp_map(base, v):
    """Exponential map at ``base`` applied to tangent vector ``v``.

    Returns ``base^{1/2} expm(base^{-1/2} v base^{-1/2}) base^{1/2}``,
    which is positive definite for every symmetric ``v``.
    """
    base = _as_spd(base, "base")
    ev = _entries_of(v, "v")
    if ev.shape != (base.dim, base.dim):
        raise ValueError("tangent vector dimension does not match the base point")
    half, ihalf = _sqrt_pair(base)
    inner = ihalf @ ev @ ihalf
    w, q = np.linalg.eigh(0.5 * (inner + inner.T))
    mid = q * np.exp(w) @ q.T
    out = half @ (0.5 * (mid + mid.T)) @ half
    return SpdMatrix(0.5 * (out + out.T))


def log_map(base, target):
    """Inverse exponential map: the tangent vector at ``base`` pointing to ``target``.

    Returns ``base^{1/2} logm(base^{-1/2} target base^{-1/2}) base^{1/2}``.
    Its metric norm at ``base`` equals ``fr_distance(base, target)``.
    """
    base = _as_spd(base, "base")
    target = _as_spd(target, "target")
    _check_dims(base, target)
    half, ihalf = _sqrt_pair(base)
    inner = ihalf @ target.entries @ ihalf
    w, q = np.linalg.eigh(0.5 * (inner + inner.T))
    mid = q * np.log(w) @ q.T
    out = half @ (0.5 * (mid + mid.T)) @ half
    return SymMatrix(0.5 * (out + out.T))


def project_fr_ball(ball, point):
    """Metric projection of an SPD matrix onto a Fisher-Rao ball.

    If the point already lies inside the ball (tested with relative slack
    ``rho' <= rho * (1 + 1e-12)`` to avoid projecting points numerically on
    the boundary) it is returned unchanged. Otherwise the projection moves
    the point along the geodesic toward the center until it sits on the
    boundary:

    .. math:: \\hat\\Sigma^{1/2}\\big(\\hat\\Sigma^{-1/2} \\Sigma'
              \\hat\\Sigma^{-1/2}\\big)^{\\rho/\\rho'} \\hat\\Sigma^{1/2}

    The distance ``rho'`` to the center is always recomputed from scratch.
    """
    if not isinstance(ball, FrBall):
        raise TypeError("ball must be an FrBall")
    point = _as_spd(point, "point")
    _check_dims(ball.center, point)
    inner = ball.center_isqrt @ point.entries @ ball.center_isqrt
    w, q = np.linalg.eigh(0.5 * (inner + inner.T))
    logw = np.log(w)
    rho_prime = np.sqrt(0.5 * np.sum(logw**2))
    if rho_prime <= ball.radius * (1.0 + _BOUNDARY_RTOL):
        return point
    power = ball.radius / rho_prime
    mid = q * np.exp(power * logw) @ q.T
    out = ball.center_sqrt @ (0.5 * (mid + mid.T)) @ ball.center_sqrt
    return SpdMatrix(0.5 * (out + out.T))
