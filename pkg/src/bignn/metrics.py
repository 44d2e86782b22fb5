"""Risk, regret, instability, timing ratios and the log-log rate regression."""

from __future__ import annotations

import contextlib
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import DataError, ParameterError, RngStream
from .synthgen import GaussianClassModel, sample

RESULT_FIELDS = ("method", "N", "gamma", "theta", "I", "k", "rep", "risk", "regret",
                 "cis", "train_ms", "predict_ms", "seed")
TIMING_FIELDS = ("train_ms", "predict_ms")
RATE_FIELDS = ("value_kind", "slope", "stderr", "correlation", "intercepts")


@dataclass
class MetricsReport:
    method: str
    N: int
    gamma: float
    k: int
    rep: int
    risk: float
    regret: float
    train_ms: float
    predict_ms: float
    seed: int
    theta: float | None = None
    I: int | None = None
    cis: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.risk <= 1.0:
            raise DataError(f"risk {self.risk} outside [0, 1]")

    def row(self) -> dict:
        return {f: getattr(self, f) for f in RESULT_FIELDS}


@dataclass
class RateFit:
    value_kind: str
    slope: float
    stderr: float
    intercepts: dict[float, float]
    correlation: float
    residuals: np.ndarray = field(repr=False, default=None)

    def row(self) -> dict:
        return {
            "value_kind": self.value_kind,
            "slope": repr(self.slope),
            "stderr": repr(self.stderr),
            "correlation": repr(self.correlation),
            "intercepts": ";".join(f"{g!r}:{b!r}" for g, b in sorted(self.intercepts.items())),
        }


def empirical_risk(predictions, truth) -> float:
    p, t = np.asarray(predictions), np.asarray(truth)
    if p.shape != t.shape or p.ndim != 1:
        raise ParameterError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ParameterError("empty prediction vector")
    return float(np.mean(p != t))


def excess_risk(predictions, eta_values) -> float:
    """Regret of a classifier on test points where the posterior is known.

    Averages ``|2 eta(x) - 1|`` over the points where the prediction departs
    from the Bayes decision ``eta(x) > 1/2``.  Unbiased for risk minus Bayes
    risk, never negative, and far less noisy than differencing two error rates.
    """
    p, e = np.asarray(predictions), np.asarray(eta_values, dtype=np.float64)
    if p.shape != e.shape or p.ndim != 1 or p.size == 0:
        raise ParameterError(f"length mismatch: {p.shape} vs {e.shape}")
    bayes = e > 0.5
    return float(np.mean(np.abs(2.0 * e - 1.0) * (p.astype(bool) != bayes)))


def disagreement(a, b) -> float:
    return empirical_risk(a, b)


def empirical_cis(trainer: Callable, model_spec: GaussianClassModel, N: int, test_points,
                  pairs: int, rng: RngStream) -> float:
    """Mean disagreement on ``test_points`` between classifiers fit to independent draws.

    ``trainer(dataset, rng)`` must return a function mapping an (m, d) array to labels.
    """
    if pairs < 1:
        raise ParameterError("pairs must be positive")
    test_points = np.atleast_2d(np.asarray(test_points, dtype=np.float64))
    if test_points.shape[0] == 0:
        raise ParameterError("test set is empty")
    total = 0.0
    for p in range(pairs):
        preds = []
        for side in (0, 1):
            data = sample(model_spec, N, rng.child("data", p, side))
            clf = trainer(data, rng.child("train", p, side))
            preds.append(np.asarray(clf(test_points)))
        total += disagreement(preds[0], preds[1])
    return total / pairs


def speedup(oracle_time: float, bignn_time: float) -> float:
    if not bignn_time > 0:
        raise ParameterError("bigNN time must be positive")
    return oracle_time / bignn_time


def fit_rate(rows: Iterable[Sequence[float]], value_kind: str = "regret") -> RateFit:
    """OLS of ``log(value)`` on ``log(N)`` with one intercept per gamma level.

    ``rows`` holds ``(gamma, N, value)`` triples.
    """
    rows = [(float(g), float(n), float(v)) for g, n, v in rows]
    for i, (g, n, v) in enumerate(rows):
        if not v > 0 or not math.isfinite(v):
            raise DataError(f"row {i} (gamma={g}, N={n}) has non-positive value {v}; log undefined")
        if not n > 0:
            raise DataError(f"row {i} has non-positive N {n}")
    if len({n for _, n, _ in rows}) < 2:
        raise DataError("need at least two distinct N values")
    gammas = sorted({g for g, _, _ in rows})
    for g in gammas:
        if len({n for gg, n, _ in rows if gg == g}) < 2:
            raise DataError(f"gamma={g} appears with fewer than two N values")

    col = {g: j for j, g in enumerate(gammas)}
    X = np.zeros((len(rows), 1 + len(gammas)))
    y = np.empty(len(rows))
    for i, (g, n, v) in enumerate(rows):
        X[i, 0] = math.log(n)
        X[i, 1 + col[g]] = 1.0
        y[i] = math.log(v)
    XtX = X.T @ X
    if np.linalg.matrix_rank(XtX) < X.shape[1]:
        raise DataError("design matrix is rank deficient")
    beta = np.linalg.solve(XtX, X.T @ y)
    fitted = X @ beta
    resid = y - fitted
    dof = len(rows) - X.shape[1]
    if dof > 0:
        sigma2 = float(resid @ resid) / dof
        stderr = math.sqrt(sigma2 * np.linalg.inv(XtX)[0, 0])
    else:
        stderr = float("nan")
    if np.std(fitted) == 0 or np.std(y) == 0:
        corr = 1.0 if np.allclose(fitted, y) else 0.0
    else:
        corr = float(np.corrcoef(fitted, y)[0, 1])
    return RateFit(value_kind, float(beta[0]), stderr,
                   {g: float(beta[1 + col[g]]) for g in gammas}, corr, resid)


@contextlib.contextmanager
def _sink(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def write_results(rows: Iterable[dict], target) -> None:
    """Write result rows to a path or an open text stream."""
    with _sink(target) as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({f: _fmt(r.get(f)) for f in RESULT_FIELDS})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


_INT_FIELDS = {"N", "I", "k", "rep", "seed"}


def read_results(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULT_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing result columns {sorted(missing)}")
        for line, r in enumerate(reader, start=2):
            row = {}
            for f in RESULT_FIELDS:
                v = r[f]
                if f == "method":
                    row[f] = v
                elif v == "":
                    row[f] = None
                else:
                    try:
                        row[f] = int(v) if f in _INT_FIELDS else float(v)
                    except ValueError:
                        raise DataError(f"{path}:{line}: column {f!r} has unparsable value {v!r}") from None
            out.append(row)
    return out


def cell_means(rows: Iterable[dict], value: str, method: str | None = None) -> list[tuple[float, int, float]]:
    """Average ``value`` per (gamma, N) cell, skipping blanks. Sorted by gamma then N."""
    acc: dict[tuple[float, int], list[float]] = {}
    for r in rows:
        if method is not None and r["method"] != method:
            continue
        v = r.get(value)
        if v is None or (isinstance(v, float) and math.isnan(v)):
            continue
        acc.setdefault((r["gamma"], r["N"]), []).append(v)
    return [(g, n, float(np.mean(vs))) for (g, n), vs in sorted(acc.items())]


def write_rate_summary(fits: Iterable[RateFit], target) -> None:
    with _sink(target) as fh:
        w = csv.DictWriter(fh, fieldnames=RATE_FIELDS, lineterminator="\n")
        w.writeheader()
        for fit in fits:
            w.writerow(fit.row())
