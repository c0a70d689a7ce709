"""Gaussian discriminant rules with optimistic-likelihood variants.

Implements classical quadratic discriminant analysis, its
linear-shrinkage-regularized variant, and flexible rules that score each
class by the maximum Gaussian log-likelihood over a Fisher-Rao or KL ball
around the fitted class covariance. Covariances default to the
Ledoit-Wolf shrinkage estimator so every class matrix is positive
definite regardless of sample counts.
"""

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .fr_geometry import FrBall
from .fr_solver import FrSolverOptions, _optimistic_values_fr_batch, optimistic_loglik_fr
from .kl_solver import _optimistic_values_kl_rank1, optimistic_loglik_kl
from .spd_core import SpdMatrix

__all__ = [
    "GaussianClassModel",
    "FlexRuleConfig",
    "gaussian_loglik",
    "ledoit_wolf",
    "fit",
    "predict_qda",
    "predict_flex",
    "cross_validate",
    "ccr",
]

# prediction-time solver defaults: line search, modest budget
_FLEX_FR_DEFAULTS = FrSolverOptions(
    max_iterations=500,
    step_mode="armijo_backtracking",
    relative_improvement_tol=1e-4,
)


class GaussianClassModel:
    """Per-class Gaussian parameters with priors.

    Classes are kept in sorted label order; ``means`` is a (C, n) array
    aligned with ``classes`` and ``covs`` the matching list of SpdMatrix
    covariances.
    """

    __slots__ = ("classes", "priors", "means", "covs", "estimator_tag")

    def __init__(self, classes, priors, means, covs, estimator_tag):
        priors = np.asarray(priors, dtype=float)
        means = np.asarray(means, dtype=float)
        if abs(float(priors.sum()) - 1.0) > 1e-12:
            raise ValueError("priors must sum to 1")
        if np.any(priors <= 0):
            raise ValueError("priors must be positive")
        if len(classes) != priors.shape[0] or means.shape[0] != priors.shape[0]:
            raise ValueError("classes, priors and means must align")
        if len(covs) != len(classes):
            raise ValueError("one covariance per class required")
        self.classes = list(classes)
        self.priors = priors
        self.means = means
        self.covs = list(covs)
        self.estimator_tag = estimator_tag

    @property
    def dim(self):
        return self.means.shape[1]


@dataclass(frozen=True)
class FlexRuleConfig:
    """Configuration of a flexible discriminant rule.

    ``divergence`` selects the ball type ("FR" or "KL");
    ``radius_per_class`` maps each class label to its ball radius;
    ``fr_solver_options`` applies only to the FR path.
    """

    divergence: str
    radius_per_class: Mapping
    fr_solver_options: FrSolverOptions = field(default=_FLEX_FR_DEFAULTS)

    def __post_init__(self):
        if self.divergence not in ("FR", "KL"):
            raise ValueError("divergence must be 'FR' or 'KL'")
        for label, radius in self.radius_per_class.items():
            if not (radius > 0):
                raise ValueError("radius for class %r must be positive" % (label,))


def gaussian_loglik(x, mean, cov):
    """Gaussian log-likelihood in the scaled convention
    -(x-mu)^T C^-1 (x-mu) - log det C (no constant, no 1/2)."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if not isinstance(cov, SpdMatrix):
        cov = SpdMatrix(cov)
    if x.shape != mean.shape or x.shape[0] != cov.dim:
        raise ValueError("dimension mismatch")
    w, q = cov.eigenvalues, cov.eigenvectors
    z = q.T @ (x - mean)
    return float(-np.sum(z * z / w) - np.sum(np.log(w)))


def ledoit_wolf(samples):
    """Ledoit-Wolf shrinkage covariance estimate.

    Blends the sample covariance with the scaled identity
    (Tr(S)/n) I using the analytically optimal intensity, clipped to
    [0, 1]. The output is positive definite whenever Tr(S) > 0.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError("samples must be a 2-d array")
    n_samp, n_feat = x.shape
    if n_samp < 2:
        raise ValueError("need at least 2 samples, got %d" % n_samp)
    dev = x - x.mean(axis=0)
    s = dev.T @ dev / (n_samp - 1)
    mu = float(np.trace(s)) / n_feat
    if mu <= 0.0:
        raise ValueError("degenerate input: sample covariance has zero trace")
    delta_sq = float(np.sum((s - mu * np.eye(n_feat)) ** 2)) / n_feat
    beta_bar = 0.0
    for row in dev:
        beta_bar += float(np.sum((np.outer(row, row) - s) ** 2))
    beta_bar /= n_samp**2 * n_feat
    if delta_sq <= 0.0:
        shrink = 0.0
    else:
        shrink = min(beta_bar / delta_sq, 1.0)
    entries = (1.0 - shrink) * s + shrink * mu * np.eye(n_feat)
    return SpdMatrix(entries, floor=1e-12 * mu, clamp=True)


def _empirical_cov(rows):
    dev = rows - rows.mean(axis=0)
    return dev.T @ dev / (rows.shape[0] - 1)


def fit(features, labels, estimator="ledoit_wolf"):
    """Fit per-class Gaussians.

    ``estimator`` is one of ``"empirical"``, ``"ledoit_wolf"``, or a
    tuple ``("linear_shrinkage", rho)`` producing the empirical estimate
    plus rho I. Every class needs at least 2 samples.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("features must be (N, n) with one label per row")
    classes = np.unique(y)
    if classes.shape[0] < 2:
        raise ValueError("need at least 2 classes, got %d" % classes.shape[0])
    priors = []
    means = []
    covs = []
    for label in classes:
        rows = x[y == label]
        if rows.shape[0] < 2:
            raise ValueError(
                "class %r has %d sample(s); at least 2 are required"
                % (label, rows.shape[0])
            )
        priors.append(rows.shape[0] / x.shape[0])
        means.append(rows.mean(axis=0))
        if estimator == "empirical":
            covs.append(SpdMatrix(_empirical_cov(rows)))
        elif estimator == "ledoit_wolf":
            covs.append(ledoit_wolf(rows))
        elif (
            isinstance(estimator, tuple)
            and len(estimator) == 2
            and estimator[0] == "linear_shrinkage"
        ):
            covs.append(
                SpdMatrix(_empirical_cov(rows) + float(estimator[1]) * np.eye(x.shape[1]))
            )
        else:
            raise ValueError("unknown estimator tag %r" % (estimator,))
    return GaussianClassModel(list(classes), priors, means, covs, estimator)


def _qda_scores(model, x_rows):
    scores = np.empty((len(model.classes), x_rows.shape[0]))
    for i, (mean, cov) in enumerate(zip(model.means, model.covs)):
        w, q = cov.eigenvalues, cov.eigenvectors
        z = (x_rows - mean) @ q
        quad = np.sum(z * z / w, axis=1)
        scores[i] = 0.5 * (-quad - np.sum(np.log(w))) + np.log(model.priors[i])
    return scores


def predict_qda(model, x):
    """Classify by argmax of (1/2) class log-likelihood plus log prior;
    ties go to the lowest class index."""
    x = np.asarray(x, dtype=float)
    scores = _qda_scores(model, x[None, :])
    return model.classes[int(np.argmax(scores[:, 0]))]


def _flex_scores(model, cfg, x_rows):
    scores = np.empty((len(model.classes), x_rows.shape[0]))
    for i, label in enumerate(model.classes):
        radius = cfg.radius_per_class[label]
        dev = x_rows - model.means[i]
        try:
            if cfg.divergence == "FR":
                ball = FrBall(model.covs[i], radius)
                values = _optimistic_values_fr_batch(ball, dev, cfg.fr_solver_options)
            else:
                values = _optimistic_values_kl_rank1(model.covs[i], radius, dev)
        except (RuntimeError, ValueError) as exc:
            raise RuntimeError(
                "optimistic solver failed for class %r: %s" % (label, exc)
            ) from exc
        scores[i] = 0.5 * values + np.log(model.priors[i])
    return scores


def predict_flex(model, cfg, x):
    """Classify by the optimistic log-likelihood over each class's ball.

    Scores are (1/2) max log-likelihood over the ball plus the log
    prior; ties go to the lowest class index. Single observations give
    rank-1 scatters, so the KL path runs its scalar dual.
    """
    x = np.asarray(x, dtype=float)
    scores = _flex_scores(model, cfg, x[None, :])
    return model.classes[int(np.argmax(scores[:, 0]))]


def _predict_flex_many(model, cfg, x_rows):
    scores = _flex_scores(model, cfg, np.asarray(x_rows, dtype=float))
    picks = np.argmax(scores, axis=0)
    return [model.classes[i] for i in picks]


def _predict_qda_many(model, x_rows):
    scores = _qda_scores(model, np.asarray(x_rows, dtype=float))
    picks = np.argmax(scores, axis=0)
    return [model.classes[i] for i in picks]


def _stratified_folds(labels, folds, seed):
    """Deterministic stratified fold ids: per class, shuffle then deal
    round-robin so fold sizes per class differ by at most one."""
    y = np.asarray(labels)
    rng = np.random.Generator(np.random.Philox(key=seed))
    fold_of = np.empty(y.shape[0], dtype=int)
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        rng_order = rng.permutation(idx.shape[0])
        fold_of[idx[rng_order]] = np.arange(idx.shape[0]) % folds
    return fold_of


def cross_validate(features, labels, method, grid=None, folds=5, seed=0,
                   estimator="ledoit_wolf"):
    """Select a shared ball radius (or shrinkage level) by stratified CV.

    Returns ``(best_radius, cv_score)`` where the score is the mean
    held-out correct classification rate; ties prefer the smallest grid
    value. QDA has no radius and returns (0.0, score). The fold
    assignment is a deterministic function of ``seed``.
    """
    if method not in ("FQDA", "KQDA", "QDA", "RQDA"):
        raise ValueError("unknown method %r" % (method,))
    if folds < 2:
        raise ValueError("folds must be >= 2")
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if method != "QDA" and (grid is None or len(grid) == 0):
        raise ValueError("method %s needs a nonempty grid" % method)

    fold_of = _stratified_folds(y, folds, seed)
    splits = []
    for f in range(folds):
        train = fold_of != f
        for label in np.unique(y):
            if np.sum(train & (y == label)) < 2:
                raise ValueError(
                    "stratification failed: fold %d leaves class %r with "
                    "fewer than 2 training samples" % (f, label)
                )
        splits.append((train, ~train))

    if method == "RQDA":
        fold_models = None
    else:
        fold_models = [fit(x[train], y[train], estimator) for train, _ in splits]

    def fold_score(radius):
        total = 0.0
        for i, (train, test) in enumerate(splits):
            if method == "RQDA":
                model = fit(x[train], y[train], ("linear_shrinkage", radius))
                preds = _predict_qda_many(model, x[test])
            else:
                model = fold_models[i]
                if method == "QDA":
                    preds = _predict_qda_many(model, x[test])
                else:
                    cfg = FlexRuleConfig(
                        divergence="FR" if method == "FQDA" else "KL",
                        radius_per_class={c: radius for c in model.classes},
                    )
                    preds = _predict_flex_many(model, cfg, x[test])
            total += ccr(preds, list(y[test]))
        return total / folds

    if method == "QDA":
        return 0.0, fold_score(None)

    best_radius, best_score = None, -np.inf
    for radius in sorted(float(r) for r in grid):
        score = fold_score(radius)
        if score > best_score:
            best_radius, best_score = radius, score
    return best_radius, best_score


def ccr(predictions, truth):
    """Fraction of positions where prediction equals truth."""
    if len(predictions) != len(truth):
        raise ValueError(
            "length mismatch: %d predictions vs %d labels"
            % (len(predictions), len(truth))
        )
    if len(predictions) == 0:
        raise ValueError("empty input")
    hits = sum(1 for p, t in zip(predictions, truth) if p == t)
    return hits / len(predictions)
