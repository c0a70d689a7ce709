"""Command-line harness for the optimistic likelihood solvers.

Subcommands: ``optimistic`` (one-shot solve of a problem JSON file),
``converge`` (synthetic convergence study of the projected descent),
``bench`` (classification benchmark on CSV datasets), and ``esterr``
(estimation-error study of the sample mean and covariance).

All randomness derives from one root seed through a counter-based
generator: stream j is Philox with ``key=seed`` and
``counter = j * 2**128``, so each cell's draws are independent of
scheduling and execution order. Outputs are CSV (default) or JSON; every
CSV opens with a metadata comment carrying the seed, a config hash, and
the library version, and figures are rendered next to the delimited
output unless disabled. ``OPTILIK_THREADS`` caps the worker pool.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from importlib import resources

import numpy as np

from . import __version__
from .classify import (
    FlexRuleConfig,
    _predict_flex_many,
    _predict_qda_many,
    ccr,
    cross_validate,
    fit,
)
from .fr_geometry import FrBall, fr_distance
from .fr_solver import FrProblem, FrSolverOptions, solve
from .kl_solver import KlProblem, kl_divergence, solve_kl
from .mean_solver import MeanProblem, fr_mean_distance, kl_mean_divergence, solve_mean
from .spd_core import DefinitenessError, SpdMatrix

__all__ = [
    "Dataset",
    "ExperimentConfig",
    "seeded_stream",
    "default_radius_grid",
    "load_csv",
    "bundled_dataset",
    "run_convergence_study",
    "run_classification_benchmark",
    "run_estimation_error_study",
    "cli_entry",
    "main",
]

_log = logging.getLogger("optilik.bench")

_BUNDLED = {
    # name: (filename, expected (rows, features, classes))
    "banknote": ("banknote.csv", (1372, 4, 2)),
    "haberman": ("haberman.csv", (306, 3, 2)),
}


class Dataset:
    """A named feature matrix with labels and file provenance."""

    __slots__ = ("name", "features", "labels", "provenance")

    def __init__(self, name, features, labels, provenance):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels)
        if features.ndim != 2 or features.shape[0] < 2:
            raise ValueError("features must be an (N, n) matrix with N >= 2")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite values")
        if labels.shape[0] != features.shape[0]:
            raise ValueError("one label per feature row required")
        self.name = name
        self.features = features
        self.labels = labels
        self.provenance = provenance


@dataclass(frozen=True)
class ExperimentConfig:
    """Driver configuration; unset radius_grid means the per-dataset
    default grid {a sqrt(n) 10^b : a in 1..9, b in -3..-1}."""

    seed: int = 0
    trials: int = 1
    radius_grid: tuple = None
    train_fraction: float = 0.75
    folds: int = 5
    methods: tuple = ("QDA", "RQDA", "FQDA", "KQDA")
    out_dir: str = None
    dims: tuple = (10, 30)
    sample_sizes: tuple = (20, 30, 40, 50, 60, 70, 80, 90, 100)
    est_dim: int = 10
    figures: bool = True

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


def seeded_stream(seed, index):
    """Generator for stream ``index``: Philox keyed by the root seed with
    the counter offset by index * 2**128, giving disjoint streams."""
    return np.random.Generator(np.random.Philox(key=seed, counter=index << 128))


def default_radius_grid(n):
    return sorted(a * np.sqrt(n) * 10.0**b for a in range(1, 10) for b in (-3, -2, -1))


def _worker_count():
    raw = os.environ.get("OPTILIK_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            _log.warning("ignoring non-integer OPTILIK_THREADS=%r", raw)
    return max(1, os.cpu_count() or 1)


def _run_cells(fn, cells):
    """Run fn over argument tuples, possibly in a bounded thread pool;
    results come back in submission order."""
    workers = min(_worker_count(), max(len(cells), 1))
    if workers <= 1 or len(cells) <= 1:
        return [fn(*cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *cell) for cell in cells]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# ingestion


def load_csv(path, label_column=-1, header=False):
    """Read a delimited file into a Dataset.

    ``label_column`` is a column index (negative allowed) or, with
    ``header=True``, a column name. Feature cells must parse as finite
    floats; offending cells are reported with 1-based row/column
    coordinates (rows counted below the header).
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if any(cell.strip() for cell in row)]
    if header:
        if not rows:
            raise ValueError("%s: empty file" % path)
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
    else:
        names = None
        body = rows
    if not body:
        raise ValueError("%s: no data rows" % path)

    width = len(body[0])
    if isinstance(label_column, str):
        if names is None:
            raise ValueError("label column by name requires header=True")
        if label_column not in names:
            raise ValueError("%s: missing label column %r" % (path, label_column))
        label_idx = names.index(label_column)
    else:
        label_idx = int(label_column)
        if label_idx < 0:
            label_idx += width
        if not (0 <= label_idx < width):
            raise ValueError("%s: label column %d out of range" % (path, label_column))

    features = []
    labels = []
    for r, row in enumerate(body):
        if len(row) != width:
            raise ValueError(
                "%s: row %d has %d cells, expected %d" % (path, r + 1, len(row), width)
            )
        feat_row = []
        for c, cell in enumerate(row):
            if c == label_idx:
                labels.append(cell.strip())
                continue
            try:
                value = float(cell)
            except ValueError:
                raise ValueError(
                    "%s: unparseable cell at row %d, column %d (%r)"
                    % (path, r + 1, c + 1, cell)
                ) from None
            if not np.isfinite(value):
                raise ValueError(
                    "%s: non-finite value at row %d, column %d (%r)"
                    % (path, r + 1, c + 1, cell)
                )
            feat_row.append(value)
        features.append(feat_row)

    with open(path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(
        name, np.asarray(features), np.asarray(labels),
        "%s sha256:%s" % (path, digest[:16]),
    )


def bundled_dataset(name):
    """Load one of the packaged benchmark datasets by registry name."""
    if name not in _BUNDLED:
        raise ValueError(
            "unknown bundled dataset %r (have: %s)" % (name, ", ".join(sorted(_BUNDLED)))
        )
    filename, expected = _BUNDLED[name]
    trav = resources.files("optilik").joinpath("datasets", filename)
    if not trav.is_file():
        raise FileNotFoundError(
            "bundled dataset %r not found at %s; place the CSV there "
            "(see the datasets README for sources and formats)" % (name, trav)
        )
    with resources.as_file(trav) as real_path:
        ds = load_csv(real_path, label_column=-1, header=False)
    rows, feats, classes = expected
    got = (ds.features.shape[0], ds.features.shape[1], np.unique(ds.labels).shape[0])
    if got != expected:
        raise ValueError(
            "bundled dataset %r has shape %s, expected (N=%d, n=%d, classes=%d)"
            % (name, got, rows, feats, classes)
        )
    return Dataset(name, ds.features, ds.labels, ds.provenance)


# ---------------------------------------------------------------------------
# drivers


# constant-step schedule: line search collapses these small instances in a
# handful of jumps, leaving no trace to study; the constant step exposes the
# decay profile and matches the reported iteration scaling
_STUDY_SOLVER_OPTIONS = FrSolverOptions(
    max_iterations=1000,
    step_mode="theorem2_constant",
    relative_improvement_tol=1e-4,
)


def run_convergence_study(cfg, solver_options=None):
    """Synthetic convergence study of the projected descent.

    For each mode (rank-1 scatter from a single observation; positive
    definite scatter from 100 observations plus a 1e-6 diagonal), each
    dimension in ``cfg.dims``, and each trial: draw a nominal matrix by
    symmetrizing a standard normal matrix and replacing its eigenvalues
    with uniform [1, 10] draws, set the radius to sqrt(n)/100, and solve.
    Returns one row per cell with the trace attached under ``_trace``;
    trace CSVs and a figure are written when ``cfg.out_dir`` is set.
    """
    opts = solver_options or _STUDY_SOLVER_OPTIONS
    modes = ("singular", "positive_definite")
    cells = [
        (m_i, mode, n_i, n, trial)
        for m_i, mode in enumerate(modes)
        for n_i, n in enumerate(cfg.dims)
        for trial in range(cfg.trials)
    ]

    def run_cell(m_i, mode, n_i, n, trial):
        stream = (m_i * len(cfg.dims) + n_i) * cfg.trials + trial
        rng = seeded_stream(cfg.seed, stream)
        b = rng.standard_normal((n, n))
        _, vecs = np.linalg.eigh(b + b.T)
        vals = rng.uniform(1.0, 10.0, size=n)
        nominal = SpdMatrix((vecs * vals) @ vecs.T)
        if mode == "singular":
            x = rng.standard_normal(n)
            scatter = np.outer(x, x)
        else:
            xs = rng.standard_normal((100, n))
            scatter = 1e-6 * np.eye(n) + xs.T @ xs / 100.0
        problem = FrProblem(FrBall(nominal, np.sqrt(n) / 100.0), scatter)
        row = {"mode": mode, "n": n, "trial": trial}
        start = time.perf_counter()
        try:
            report = solve(problem, opts)
        except RuntimeError as exc:
            _log.warning("convergence cell %s/n=%d/trial=%d failed: %s", mode, n, trial, exc)
            row.update(
                iterations="", wall_seconds="", final_objective="",
                best_objective="", termination="", status="failed: %s" % exc,
            )
            row["_trace"] = np.array([])
            return row
        row.update(
            iterations=report.iterations_used,
            wall_seconds=round(time.perf_counter() - start, 6),
            final_objective=report.objective_trace[-1],
            best_objective=report.best_objective,
            termination=report.termination,
            status="ok",
        )
        row["_trace"] = report.objective_trace
        return row

    rows = _run_cells(run_cell, cells)

    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        for row in rows:
            trace_path = os.path.join(
                cfg.out_dir,
                "trace_%s_n%d_trial%d.csv" % (row["mode"], row["n"], row["trial"]),
            )
            _write_csv(
                trace_path,
                ["iteration", "objective"],
                [
                    {"iteration": i, "objective": v}
                    for i, v in enumerate(row["_trace"])
                ],
                cfg,
            )
        if cfg.figures:
            from .figures import convergence_figure

            traces = {}
            for row in rows:
                if row["status"] == "ok":
                    label = "n=%d trial=%d" % (row["n"], row["trial"])
                    traces.setdefault(row["mode"], []).append((label, row["_trace"]))
            convergence_figure(traces, os.path.join(cfg.out_dir, "convergence.png"))
    return rows


def _stratified_split(labels, fraction, rng):
    y = np.asarray(labels)
    train = np.zeros(y.shape[0], dtype=bool)
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        perm = rng.permutation(idx)
        n_tr = int(round(fraction * idx.size))
        n_tr = min(max(n_tr, 2), idx.size)
        train[perm[:n_tr]] = True
    return train, ~train


def run_classification_benchmark(cfg, datasets):
    """Benchmark the discriminant rules on each dataset.

    Per dataset, trial splits are drawn once and shared by every method;
    each method then selects its radius by stratified CV on the training
    part and is scored on the held-out part. Returns per-trial rows plus
    one mean row per dataset and method.
    """
    rows = []
    for d_i, ds in enumerate(datasets):
        class_counts = np.unique(ds.labels, return_counts=True)[1]
        if class_counts.shape[0] < 2:
            _log.warning("skipping %s: fewer than 2 classes", ds.name)
            continue
        if class_counts.min() < 2 * cfg.folds:
            _log.warning(
                "skipping %s: smallest class has %d samples, need >= %d",
                ds.name, class_counts.min(), 2 * cfg.folds,
            )
            continue
        grid = list(cfg.radius_grid) if cfg.radius_grid else default_radius_grid(
            ds.features.shape[1]
        )

        splits = []
        for trial in range(cfg.trials):
            rng = seeded_stream(cfg.seed, d_i * cfg.trials + trial)
            train, test = _stratified_split(ds.labels, cfg.train_fraction, rng)
            if not test.any():
                raise ValueError("dataset %s too small for a held-out split" % ds.name)
            cv_seed = int(rng.integers(2**63))
            splits.append((train, test, cv_seed))

        def run_cell(method, trial):
            train, test, cv_seed = splits[trial]
            x_tr, y_tr = ds.features[train], ds.labels[train]
            x_te, y_te = ds.features[test], ds.labels[test]
            radius, cv_score = cross_validate(
                x_tr, y_tr, method, grid=grid, folds=cfg.folds, seed=cv_seed
            )
            if method == "RQDA":
                model = fit(x_tr, y_tr, ("linear_shrinkage", radius))
                preds = _predict_qda_many(model, x_te)
            elif method == "QDA":
                model = fit(x_tr, y_tr)
                preds = _predict_qda_many(model, x_te)
            else:
                model = fit(x_tr, y_tr)
                flex = FlexRuleConfig(
                    divergence="FR" if method == "FQDA" else "KL",
                    radius_per_class={c: radius for c in model.classes},
                )
                preds = _predict_flex_many(model, flex, x_te)
            return {
                "dataset": ds.name,
                "method": method,
                "trial": trial,
                "radius": radius,
                "cv_score": cv_score,
                "test_ccr": ccr(preds, list(y_te)),
            }

        cells = [(m, t) for m in cfg.methods for t in range(cfg.trials)]
        cell_rows = _run_cells(run_cell, cells)
        rows.extend(cell_rows)
        for method in cfg.methods:
            scores = [r["test_ccr"] for r in cell_rows if r["method"] == method]
            rows.append(
                {
                    "dataset": ds.name,
                    "method": method,
                    "trial": "mean",
                    "radius": "",
                    "cv_score": "",
                    "test_ccr": float(np.mean(scores)),
                }
            )

    if cfg.out_dir and cfg.figures and rows:
        os.makedirs(cfg.out_dir, exist_ok=True)
        from .figures import benchmark_figure

        benchmark_figure(rows, os.path.join(cfg.out_dir, "benchmark_ccr.png"))
    return rows


def run_estimation_error_study(cfg):
    """Average FR and KL errors of the sample mean and covariance.

    For each sample size N: draw a true covariance A A^T from a standard
    normal A, sample N points, and measure the divergence from the
    estimated to the true distribution, varying one parameter at a time
    (mean with true covariance fixed, covariance with true mean fixed).
    Trials whose sample covariance fails the definiteness check are
    skipped and counted.
    """
    n = cfg.est_dim
    cells = [
        (n_i, big_n, trial)
        for n_i, big_n in enumerate(cfg.sample_sizes)
        for trial in range(cfg.trials)
    ]

    def run_cell(n_i, big_n, trial):
        rng = seeded_stream(cfg.seed, n_i * cfg.trials + trial)
        a = rng.standard_normal((n, n))
        try:
            sigma = SpdMatrix(a @ a.T)
        except DefinitenessError:
            return None
        root = (sigma.eigenvectors * np.sqrt(sigma.eigenvalues)) @ sigma.eigenvectors.T
        xs = rng.standard_normal((big_n, n)) @ root
        mu_hat = xs.mean(axis=0)
        dev = xs - mu_hat
        try:
            cov_hat = SpdMatrix(dev.T @ dev / (big_n - 1))
        except DefinitenessError:
            return None
        zero = np.zeros(n)
        return (
            fr_mean_distance(mu_hat, zero, sigma),
            fr_distance(cov_hat, sigma),
            kl_mean_divergence(mu_hat, zero, sigma),
            kl_divergence(cov_hat, sigma),
        )

    results = _run_cells(run_cell, cells)
    rows = []
    for n_i, big_n in enumerate(cfg.sample_sizes):
        chunk = results[n_i * cfg.trials : (n_i + 1) * cfg.trials]
        good = [r for r in chunk if r is not None]
        skipped = len(chunk) - len(good)
        if not good:
            rows.append(
                {
                    "sample_size": big_n, "fr_mean_error": "", "fr_cov_error": "",
                    "kl_mean_error": "", "kl_cov_error": "",
                    "trials_used": 0, "trials_skipped": skipped,
                }
            )
            continue
        stacked = np.asarray(good)
        rows.append(
            {
                "sample_size": big_n,
                "fr_mean_error": float(stacked[:, 0].mean()),
                "fr_cov_error": float(stacked[:, 1].mean()),
                "kl_mean_error": float(stacked[:, 2].mean()),
                "kl_cov_error": float(stacked[:, 3].mean()),
                "trials_used": len(good),
                "trials_skipped": skipped,
            }
        )

    if cfg.out_dir and cfg.figures:
        os.makedirs(cfg.out_dir, exist_ok=True)
        from .figures import estimation_figure

        estimation_figure(
            [r for r in rows if r["trials_used"]],
            os.path.join(cfg.out_dir, "estimation_error.png"),
        )
    return rows


# ---------------------------------------------------------------------------
# output


def _config_hash(cfg):
    # out_dir and figures are presentation-only: two runs of the same
    # experiment hash identically wherever their files land
    fields = {k: v for k, v in asdict(cfg).items() if k not in ("out_dir", "figures")}
    payload = json.dumps(fields, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _metadata(cfg):
    return "seed=%d config=%s version=%s" % (cfg.seed, _config_hash(cfg), __version__)


def _write_csv(path, fieldnames, rows, cfg):
    with open(path, "w", newline="") as fh:
        fh.write("# %s\n" % _metadata(cfg))
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore", restval="")
        writer.writeheader()
        writer.writerows(rows)


def _write_json(path, fieldnames, rows, cfg):
    payload = {
        "seed": cfg.seed,
        "config_hash": _config_hash(cfg),
        "version": __version__,
        "rows": [{k: _json_cell(row.get(k, "")) for k in fieldnames} for row in rows],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _json_cell(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _emit(cfg, fmt, base_name, fieldnames, rows):
    out_dir = cfg.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "%s.%s" % (base_name, fmt))
    if fmt == "csv":
        _write_csv(path, fieldnames, rows, cfg)
    else:
        _write_json(path, fieldnames, rows, cfg)
    return path


# ---------------------------------------------------------------------------
# CLI


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write("%s: error: %s\n" % (self.prog, message))
        raise _UsageError(message)


def _add_common(sub):
    sub.add_argument("--seed", type=int, default=0, help="root RNG seed")
    sub.add_argument("--config", help="JSON file overriding config fields")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_argument("--trials", type=int, help="number of trials")
    sub.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def _build_parser():
    parser = _Parser(prog="optilik", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_opt = subs.add_parser("optimistic", help="solve one problem from a JSON file")
    p_opt.add_argument("problem", help="problem JSON path")
    _add_common(p_opt)
    p_opt.set_defaults(handler=_cmd_optimistic)

    p_con = subs.add_parser("converge", help="run the convergence study")
    p_con.add_argument("--dims", default=None, help="comma-separated dimensions")
    _add_common(p_con)
    p_con.set_defaults(handler=_cmd_converge)

    p_ben = subs.add_parser("bench", help="run the classification benchmark")
    p_ben.add_argument(
        "--datasets", default="banknote,haberman",
        help="comma-separated bundled dataset names (empty to skip)",
    )
    p_ben.add_argument(
        "--data", action="append", default=[],
        help="extra CSV dataset path (may repeat)",
    )
    p_ben.add_argument(
        "--label-column", default="-1",
        help="label column for --data files: index or, with --header, a name",
    )
    p_ben.add_argument("--header", action="store_true", help="--data files have a header row")
    _add_common(p_ben)
    p_ben.set_defaults(handler=_cmd_bench)

    p_est = subs.add_parser("esterr", help="run the estimation-error study")
    p_est.add_argument("--sizes", default=None, help="comma-separated sample sizes")
    p_est.add_argument("--dim", type=int, default=None, help="ambient dimension")
    _add_common(p_est)
    p_est.set_defaults(handler=_cmd_esterr)
    return parser


def _config_from_args(args, **extra):
    cfg = ExperimentConfig()
    if args.config:
        with open(args.config) as fh:
            overrides = json.load(fh)
        if not isinstance(overrides, dict):
            raise ValueError("%s: config must be a JSON object" % args.config)
        valid = set(ExperimentConfig.__dataclass_fields__)
        for key, value in overrides.items():
            if key not in valid:
                raise ValueError("%s: unknown config field %r" % (args.config, key))
            if isinstance(value, list):
                overrides[key] = tuple(value)
        cfg = replace(cfg, **overrides)
    updates = {"seed": args.seed}
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.no_figures:
        updates["figures"] = False
    updates.update(extra)
    return replace(cfg, **updates)


def _nominal_value(cov, mean, obs):
    dev = obs - mean
    w, q = cov.eigenvalues, cov.eigenvectors
    z = dev @ q
    quad = float(np.mean(np.sum(z * z / w, axis=1)))
    return -(quad + float(np.sum(np.log(w))))


def _cmd_optimistic(args):
    with open(args.problem) as fh:
        data = json.load(fh)
    for key in ("mean", "cov", "rho", "divergence", "observations"):
        if key not in data:
            raise ValueError("problem file %s: missing field %r" % (args.problem, key))
    mean = np.asarray(data["mean"], dtype=float)
    cov = SpdMatrix(np.asarray(data["cov"], dtype=float))
    rho = float(data["rho"])
    divergence = data["divergence"]
    obs = np.atleast_2d(np.asarray(data["observations"], dtype=float))
    if divergence not in ("fr", "kl", "fr-mean", "kl-mean"):
        raise ValueError("unknown divergence %r" % divergence)
    if obs.size == 0:
        raise ValueError("observations must be nonempty")
    if obs.shape[1] != mean.shape[0] or mean.shape[0] != cov.dim:
        raise ValueError("mean, cov and observations disagree on dimension")
    if rho < 0:
        raise ValueError("rho must be nonnegative")

    out = {"divergence": divergence, "rho": rho}
    if rho == 0.0:
        optimizer = mean if divergence.endswith("-mean") else cov.entries
        out.update(
            value=_nominal_value(cov, mean, obs),
            gamma_star=0.0,
            iterations=0,
            optimizer=np.asarray(optimizer).tolist(),
        )
    elif divergence == "fr":
        dev = obs - mean
        problem = FrProblem(FrBall(cov, rho), dev.T @ dev / obs.shape[0])
        report = solve(problem)
        out.update(
            value=-report.best_objective,
            iterations=report.iterations_used,
            optimizer=report.best_iterate.entries.tolist(),
        )
    elif divergence == "kl":
        dev = obs - mean
        m_count = obs.shape[0]
        if m_count < cov.dim:
            problem = KlProblem(cov, rho, factor=dev.T / np.sqrt(m_count))
        else:
            problem = KlProblem(cov, rho, scatter=dev.T @ dev / m_count)
        sol = solve_kl(problem)
        out.update(
            value=-sol.optimal_value,
            gamma_star=sol.gamma_star,
            optimizer=sol.optimizer.entries.tolist(),
        )
    else:
        radius = rho if divergence == "fr-mean" else np.sqrt(2.0 * rho)
        problem = MeanProblem.from_observations(obs, mean, cov, radius)
        mu_star, gamma_star, value = solve_mean(problem)
        out.update(value=-value, gamma_star=gamma_star, optimizer=mu_star.tolist())
    print(json.dumps(out, indent=2))
    return 0


def _cmd_converge(args):
    extra = {}
    if args.dims:
        extra["dims"] = tuple(int(d) for d in args.dims.split(","))
    cfg = _config_from_args(args, **extra)
    if cfg.out_dir is None:
        cfg = replace(cfg, out_dir="optilik_out")
    rows = run_convergence_study(cfg)
    fields = [
        "mode", "n", "trial", "iterations", "wall_seconds",
        "final_objective", "best_objective", "termination", "status",
    ]
    path = _emit(cfg, args.format, "convergence_summary", fields, rows)
    print("wrote %d rows to %s" % (len(rows), path))
    return 0


def _cmd_bench(args):
    cfg = _config_from_args(args)
    datasets = []
    for name in filter(None, (s.strip() for s in args.datasets.split(","))):
        datasets.append(bundled_dataset(name))
    label_col = args.label_column
    try:
        label_col = int(label_col)
    except ValueError:
        if not args.header:
            raise ValueError("--label-column must be an index without --header") from None
    for path in args.data:
        datasets.append(load_csv(path, label_column=label_col, header=args.header))
    if not datasets:
        raise ValueError("no datasets selected")
    rows = run_classification_benchmark(cfg, datasets)
    fields = ["dataset", "method", "trial", "radius", "cv_score", "test_ccr"]
    path = _emit(cfg, args.format, "benchmark_results", fields, rows)
    print("wrote %d rows to %s" % (len(rows), path))
    return 0


def _cmd_esterr(args):
    extra = {}
    if args.sizes:
        extra["sample_sizes"] = tuple(int(s) for s in args.sizes.split(","))
    if args.dim is not None:
        extra["est_dim"] = args.dim
    cfg = _config_from_args(args, **extra)
    rows = run_estimation_error_study(cfg)
    fields = [
        "sample_size", "fr_mean_error", "fr_cov_error",
        "kl_mean_error", "kl_cov_error", "trials_used", "trials_skipped",
    ]
    path = _emit(cfg, args.format, "estimation_error", fields, rows)
    print("wrote %d rows to %s" % (len(rows), path))
    return 0


def cli_entry(argv=None):
    """Parse arguments and dispatch; returns the process exit code
    (0 success, 1 usage error, 2 data error, 3 solver error)."""
    if argv is None:
        argv = sys.argv[1:]
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.handler(args)
    except _UsageError:
        return 1
    except RuntimeError as exc:
        sys.stderr.write("solver error: %s\n" % exc)
        return 3
    except (OSError, ValueError, KeyError, TypeError) as exc:
        sys.stderr.write("data error: %s\n" % exc)
        return 2


def main():
    sys.exit(cli_entry())
