"""Dense symmetric linear algebra and spectral matrix functions.

Every matrix function in this package (log, exp, fractional powers) is
evaluated through a single symmetric eigendecomposition path. Matrices are
kept explicitly symmetric: results of manifold operations are symmetrized
as (A + A^T)/2 before they are wrapped in a domain type.
"""

import numpy as np

__all__ = [
    "DefinitenessError",
    "SpectralError",
    "SpdMatrix",
    "SymMatrix",
    "sym_eig",
    "spectral_fn",
    "log_det",
    "trace_inner",
]

# default strict lower bound on eigenvalues of an SpdMatrix
EIG_FLOOR = 1e-12

# per-element symmetry tolerance on construction
SYM_ATOL = 1e-10


class DefinitenessError(ValueError):
    """A matrix required to be positive definite is not."""


class SpectralError(RuntimeError):
    """The symmetric eigendecomposition failed to converge."""

    def __init__(self, message, condition_estimate=None):
        if condition_estimate is not None:
            message = "%s (condition estimate %.3e)" % (message, condition_estimate)
        super().__init__(message)
        self.condition_estimate = condition_estimate


def _as_square_array(entries, name):
    arr = np.asarray(entries, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("%s must be a square matrix, got shape %s" % (name, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise ValueError("%s contains non-finite entries" % name)
    return arr


def _check_symmetric(arr, name):
    dev = np.max(np.abs(arr - arr.T)) if arr.size else 0.0
    if dev > SYM_ATOL:
        raise ValueError(
            "%s is not symmetric: max |A - A^T| element is %.3e > %.1e"
            % (name, dev, SYM_ATOL)
        )


def _eigh_or_raise(arr):
    try:
        return np.linalg.eigh(arr)
    except np.linalg.LinAlgError as exc:
        try:
            cond = float(np.linalg.cond(arr))
        except Exception:
            cond = None
        raise SpectralError("eigendecomposition did not converge", cond) from exc


def _freeze(arr):
    arr.setflags(write=False)
    return arr


class SymMatrix:
    """Dense symmetric real matrix with no definiteness requirement.

    Holds sample covariance matrices (possibly singular) and tangent
    vectors. Entries are validated to be symmetric within 1e-10 per
    element and stored symmetrized.
    """

    __slots__ = ("dim", "entries")

    def __init__(self, entries):
        arr = _as_square_array(entries, "SymMatrix entries")
        _check_symmetric(arr, "SymMatrix entries")
        self.dim = arr.shape[0]
        self.entries = _freeze(0.5 * (arr + arr.T))

    def __repr__(self):
        return "SymMatrix(dim=%d)" % self.dim


class SpdMatrix:
    """Symmetric positive definite matrix with a cached eigendecomposition.

    The eigendecomposition is computed once at construction and shared with
    the matrix; both are immutable afterwards, so values are safe to share
    across threads. Eigenvalues must exceed ``floor`` (strict); violations
    raise :class:`DefinitenessError` unless ``clamp=True``, in which case
    offending eigenvalues are lifted to ``floor`` and the entries are
    rebuilt from the clamped spectrum (intended for estimator outputs).

    Parameters
    ----------
    entries : array_like of shape (n, n)
        Symmetric positive definite matrix.
    floor : float, default 1e-12
        Strict lower bound on the eigenvalues.
    clamp : bool, default False
        Lift eigenvalues below ``floor`` instead of raising.

    Attributes
    ----------
    dim : int
    entries : ndarray of shape (n, n)
    eigenvalues : ndarray of shape (n,)
        Ascending.
    eigenvectors : ndarray of shape (n, n)
        Orthogonal, columns matching ``eigenvalues``.
    """

    __slots__ = ("dim", "entries", "eigenvalues", "eigenvectors")

    def __init__(self, entries, floor=EIG_FLOOR, clamp=False):
        arr = _as_square_array(entries, "SpdMatrix entries")
        _check_symmetric(arr, "SpdMatrix entries")
        arr = 0.5 * (arr + arr.T)
        w, q = _eigh_or_raise(arr)
        if clamp:
            if w[0] < floor:
                w = np.maximum(w, floor)
                arr = q * w @ q.T
                arr = 0.5 * (arr + arr.T)
        elif w[0] <= floor:
            raise DefinitenessError(
                "matrix is not positive definite above the floor: "
                "min eigenvalue %.6e <= %.1e" % (w[0], floor)
            )
        self.dim = arr.shape[0]
        self.entries = _freeze(arr)
        self.eigenvalues = _freeze(w)
        self.eigenvectors = _freeze(q)

    def __repr__(self):
        return "SpdMatrix(dim=%d, cond=%.3e)" % (
            self.dim,
            self.eigenvalues[-1] / self.eigenvalues[0],
        )


def _entries_of(m, name="matrix"):
    # accept a domain type or raw array; raw arrays are validated through SymMatrix
    if isinstance(m, (SpdMatrix, SymMatrix)):
        return m.entries
    return SymMatrix(np.asarray(m, dtype=float)).entries


def sym_eig(m):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    m : SymMatrix or SpdMatrix or array_like
        Symmetric matrix.

    Returns
    -------
    eigenvalues : ndarray of shape (n,)
        Ascending.
    eigenvectors : ndarray of shape (n, n)
        Orthogonal matrix whose columns are the eigenvectors, so that
        ``Q @ diag(w) @ Q.T`` reconstructs the input.

    Raises
    ------
    SpectralError
        If the eigen-iteration does not converge; the error carries a
        condition estimate of the input.
    """
    if isinstance(m, SpdMatrix):
        return m.eigenvalues.copy(), m.eigenvectors.copy()
    return _eigh_or_raise(_entries_of(m))


def spectral_fn(m, f):
    """Apply a scalar function to an SPD matrix through its spectrum.

    Computes ``Q diag(f(w)) Q^T`` where ``m = Q diag(w) Q^T``. Used for the
    matrix logarithm, exponential and fractional powers.

    Parameters
    ----------
    m : SpdMatrix
    f : callable
        Scalar real function, finite on all eigenvalues of ``m``.

    Returns
    -------
    SymMatrix

    Raises
    ------
    ValueError
        If ``f`` is not finite at some eigenvalue; the message names the
        offending eigenvalue.
    """
    if not isinstance(m, SpdMatrix):
        m = SpdMatrix(m)
    w, q = m.eigenvalues, m.eigenvectors
    with np.errstate(all="ignore"):
        vals = np.asarray(f(w), dtype=float)
    if vals.shape != w.shape:
        vals = np.array([float(f(x)) for x in w])
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise ValueError(
            "spectral function is not finite at eigenvalue %.6e" % w[np.argmax(bad)]
        )
    out = q * vals @ q.T
    return SymMatrix(0.5 * (out + out.T))


def log_det(m):
    """Log-determinant of a positive definite matrix.

    Equals the sum of the logs of the eigenvalues.
    """
    if not isinstance(m, SpdMatrix):
        m = SpdMatrix(m)
    return float(np.sum(np.log(m.eigenvalues)))


def trace_inner(a, b):
    """Trace inner product Tr(a b) of two symmetric matrices.

    For symmetric arguments this is the Frobenius inner product
    ``sum_ij a_ij b_ij``; it is symmetric in its arguments.
    """
    ea = _entries_of(a, "a")
    eb = _entries_of(b, "b")
    if ea.shape != eb.shape:
        raise ValueError(
            "dimension mismatch: %s vs %s" % (ea.shape, eb.shape)
        )
    return float(np.einsum("ij,ij->", ea, eb))
