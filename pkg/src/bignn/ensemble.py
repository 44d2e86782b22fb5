"""Divide-and-conquer kNN ensemble: k selection, local kNN votes, majority aggregation."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (ConfigError, Dataset, ParameterError, PartitionPlan, RngStream,
                   make_partition, round_half_up)
from .knn_index import KnnIndex, build_index, mean_label

K_O_STAR = 1.351284


def select_k(alpha: float, n: int, s: int, k_o: float = 1.0) -> int:
    """Local neighbor count ``k_o * n**(2a/(2a+1)) * s**(-1/(2a+1))``, rounded, at least 1."""
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    if not k_o > 0:
        raise ParameterError(f"k_o must be positive, got {k_o}")
    if n < 1 or s < 1:
        raise ParameterError("n and s must be positive")
    value = k_o * n ** (2 * alpha / (2 * alpha + 1)) * s ** (-1 / (2 * alpha + 1))
    return max(1, round_half_up(value))


def select_k_sim3(N: int, s: int, K_exponent: float = 0.7, k_o_star: float = K_O_STAR) -> int:
    """``ceil(k_o_star * K / s)`` with oracle neighbor count ``K = round(N**K_exponent)``."""
    if N < 1 or s < 1:
        raise ParameterError("N and s must be positive")
    if not k_o_star > 0:
        raise ParameterError("k_o_star must be positive")
    K = round_half_up(N**K_exponent)
    return max(1, math.ceil(k_o_star * K / s))


def divide_oracle_k(k_oracle: int, s: int) -> int:
    if k_oracle < 1 or s < 1:
        raise ParameterError("k_oracle and s must be positive")
    return max(1, round_half_up(k_oracle / s))


# k rules: called with (N, s, n) where n is the smallest subsample size

@dataclass(frozen=True)
class TheoryK:
    alpha: float
    k_o: float = 1.0

    def __call__(self, N: int, s: int, n: int) -> int:
        return select_k(self.alpha, n, s, self.k_o)


@dataclass(frozen=True)
class Sim3K:
    K_exponent: float = 0.7
    k_o_star: float = K_O_STAR

    def __call__(self, N: int, s: int, n: int) -> int:
        return select_k_sim3(N, s, self.K_exponent, self.k_o_star)


@dataclass(frozen=True)
class FixedK:
    k: int

    def __call__(self, N: int, s: int, n: int) -> int:
        return self.k


@dataclass(frozen=True)
class OracleDividedK:
    """Oracle-tuned k shared out across the subsamples."""

    k_oracle: int

    def __call__(self, N: int, s: int, n: int) -> int:
        return divide_oracle_k(self.k_oracle, s)


@dataclass
class BigNnModel:
    local_indices: list[KnnIndex]
    k_local: int
    gamma: float
    partition: PartitionPlan
    k_o: float = 1.0
    seed: tuple = ()
    build_seconds: tuple = field(default=(), repr=False, compare=False)
    partition_seconds: float = field(default=0.0, repr=False, compare=False)

    @property
    def s(self) -> int:
        return len(self.local_indices)

    @property
    def dim(self) -> int:
        return self.local_indices[0].dim


def check_k(k_local: int, partition: PartitionPlan) -> None:
    sizes = partition.sizes()
    if k_local < 1:
        raise ConfigError(f"k_local must be positive, got {k_local}")
    if k_local > sizes.min():
        j = int(np.argmin(sizes))
        raise ConfigError(
            f"k_local={k_local} exceeds the size {sizes[j]} of subsample {j} "
            f"(N={partition.N}, gamma={partition.gamma}, s={partition.s})")


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def train(dataset: Dataset, gamma: float, k_rule, rng: RngStream, *,
          index_kind: str = "kdtree", threads: int = 1) -> BigNnModel:
    """Partition ``dataset`` into ``round(N**gamma)`` subsamples and index each one.

    ``k_rule`` is any callable ``(N, s, n) -> k`` (see :class:`TheoryK` and friends).
    Raises :class:`ConfigError` when the chosen k exceeds some subsample's size.
    """
    t0 = time.perf_counter()
    plan = make_partition(dataset, gamma, rng)
    groups = plan.groups()
    t_part = time.perf_counter() - t0
    k_local = int(k_rule(dataset.size, plan.s, plan.n))
    check_k(k_local, plan)

    def build(idx):
        t = time.perf_counter()
        index = build_index(dataset.X[idx], dataset.y[idx], ids=idx, kind=index_kind)
        return index, time.perf_counter() - t

    built = _map(build, groups, threads)
    return BigNnModel(
        local_indices=[b[0] for b in built],
        k_local=k_local,
        gamma=float(gamma),
        partition=plan,
        k_o=float(getattr(k_rule, "k_o", getattr(k_rule, "k_o_star", 1.0))),
        seed=(rng.master_seed, rng.stream_id),
        build_seconds=tuple(b[1] for b in built),
        partition_seconds=t_part,
    )


def predict_local(index: KnnIndex, k: int, x) -> int:
    """1 iff the mean label of the k nearest neighbors is strictly above 1/2."""
    return int(mean_label(index.query(x, k)) > 0.5)


def local_votes(index: KnnIndex, k: int, X) -> np.ndarray:
    """Vectorized :func:`predict_local` over the rows of ``X``."""
    labels = index.neighbor_labels(X, k)
    # mean > 1/2  <=>  2 * (number of ones) > count, done in integers
    return (2 * labels.sum(axis=1, dtype=np.int64) > labels.shape[1]).astype(np.int8)


def majority(votes: np.ndarray) -> np.ndarray:
    """Strict majority over axis 0; exactly half the votes gives 0."""
    votes = np.asarray(votes)
    return (2 * votes.sum(axis=0, dtype=np.int64) > votes.shape[0]).astype(np.int8)


def vote_matrix(model: BigNnModel, X, *, threads: int = 1,
                timings: list | None = None) -> np.ndarray:
    """Local decisions of every subsample, shape (s, m).

    When ``timings`` is a list, the wall-clock seconds of each subsample's query
    batch are appended to it.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))

    def run(index):
        t = time.perf_counter()
        v = local_votes(index, model.k_local, X)
        return v, time.perf_counter() - t

    out = _map(run, model.local_indices, threads)
    if timings is not None:
        timings.extend(o[1] for o in out)
    return np.stack([o[0] for o in out])


def predict_batch(model: BigNnModel, X, *, threads: int = 1) -> np.ndarray:
    return majority(vote_matrix(model, X, threads=threads))


def predict(model: BigNnModel, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.dim:
        raise ParameterError(f"query dimension {x.shape} does not match model dimension {model.dim}")
    return int(predict_batch(model, x[None, :])[0])


def knn_predict(dataset: Dataset, X, k: int, *, index_kind: str = "kdtree") -> np.ndarray:
    """Oracle kNN over the whole dataset."""
    return local_votes(build_index(dataset, kind=index_kind), k, np.atleast_2d(X))


def stratified_folds(y: np.ndarray, folds: int, rng: RngStream) -> np.ndarray:
    """Fold id per point; each class is shuffled and dealt round-robin."""
    gen = rng.generator()
    fold = np.empty(len(y), dtype=np.int64)
    offset = 0
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[gen.permutation(len(idx))]
        fold[idx] = (np.arange(len(idx)) + offset) % folds
        offset += len(idx)
    return fold


def cv_errors(dataset: Dataset, folds: int, k_grid: Sequence[int], rng: RngStream,
              index_kind: str = "kdtree") -> np.ndarray:
    """Mean validation misclassification rate for each k in ``k_grid``."""
    if folds < 2:
        raise ParameterError(f"cross-validation needs at least 2 folds, got {folds}")
    k_grid = [int(k) for k in k_grid]
    if not k_grid or min(k_grid) < 1:
        raise ParameterError("k_grid must be a nonempty list of positive integers")
    if folds > dataset.size:
        raise ParameterError("more folds than points")
    fold = stratified_folds(dataset.y, folds, rng)
    smallest_train = min(int(np.sum(fold != f)) for f in range(folds))
    if max(k_grid) > smallest_train:
        raise ParameterError(f"max(k_grid)={max(k_grid)} exceeds smallest training fold {smallest_train}")
    kmax = max(k_grid)
    ks = np.asarray(k_grid)
    errors = np.zeros((folds, len(k_grid)))
    for f in range(folds):
        tr, va = np.flatnonzero(fold != f), np.flatnonzero(fold == f)
        if len(va) == 0:
            continue
        index = build_index(dataset.X[tr], dataset.y[tr], ids=tr, kind=index_kind)
        labels = index.neighbor_labels(dataset.X[va], kmax).astype(np.int64)
        ones = np.cumsum(labels, axis=1)[:, ks - 1]  # (n_val, len(k_grid))
        pred = 2 * ones > ks[None, :]
        errors[f] = np.mean(pred != dataset.y[va][:, None], axis=0)
    return errors.mean(axis=0)


def tune_k_cv(dataset: Dataset, folds: int, k_grid: Sequence[int], rng: RngStream,
              index_kind: str = "kdtree") -> int:
    """k with the smallest cross-validated error; ties go to the smallest k."""
    errs = cv_errors(dataset, folds, k_grid, rng, index_kind)
    best = errs.min()
    return min(int(k) for k, e in zip(k_grid, errs) if e == best)
