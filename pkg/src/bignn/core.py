"""Domain types, seeded random streams and partition arithmetic."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


class BigNnError(Exception):
    """Base class for all errors raised by the package."""


class ParameterError(BigNnError, ValueError):
    """An argument is outside its documented domain."""


class ConfigError(BigNnError):
    """An experiment or model configuration is infeasible."""


class DataError(BigNnError):
    """Input data cannot be used (bad values, bad shape, rank deficiency)."""


def round_half_up(x: float) -> int:
    """Nearest integer, halves rounded away from zero (for x >= 0)."""
    if x < 0:
        return -round_half_up(-x)
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class LabeledPoint:
    features: tuple[float, ...]
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ParameterError(f"label must be 0 or 1, got {self.label!r}")
        if not all(math.isfinite(v) for v in self.features):
            raise ParameterError("features must be finite")


class Dataset:
    """Feature matrix ``X`` (N, d) plus binary labels ``y`` (N,).

    Arrays are copied and made read-only so a dataset can be shared freely.
    """

    __slots__ = ("X", "y")

    def __init__(self, X, y):
        X = np.array(X, dtype=np.float64, copy=True)
        y = np.array(y, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ParameterError(f"features must be 2-D, got shape {X.shape}")
        if X.shape[0] < 1:
            raise ParameterError("dataset must contain at least one point")
        if X.shape[1] < 1:
            raise ParameterError("dimension must be positive")
        if y.shape != (X.shape[0],):
            raise ParameterError(f"labels shape {y.shape} does not match {X.shape[0]} points")
        if not np.all(np.isfinite(X)):
            raise ParameterError("all coordinates must be finite")
        if not np.all((y == 0) | (y == 1)):
            raise ParameterError("labels must be in {0, 1}")
        y = y.astype(np.int8)
        X.setflags(write=False)
        y.setflags(write=False)
        self.X = X
        self.y = y

    @classmethod
    def from_points(cls, points: Sequence[LabeledPoint]) -> Dataset:
        if not points:
            raise ParameterError("dataset must contain at least one point")
        dims = {len(p.features) for p in points}
        if len(dims) != 1:
            raise ParameterError(f"inconsistent point dimensions: {sorted(dims)}")
        return cls([p.features for p in points], [p.label for p in points])

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.size

    @property
    def points(self) -> Iterator[LabeledPoint]:
        for row, lab in zip(self.X, self.y):
            yield LabeledPoint(tuple(float(v) for v in row), int(lab))

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx])

    def __repr__(self) -> str:
        return f"Dataset(N={self.size}, d={self.dim})"


def _tag_code(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise ParameterError("stream indices must be nonnegative")
        return int(tag)
    if isinstance(tag, float):
        # grid values such as gamma=0.3 become stable integer keys
        return zlib.crc32(repr(tag).encode())
    return zlib.crc32(str(tag).encode())


@dataclass(frozen=True)
class RngStream:
    """Seed for one logical task: ``(master_seed, stream_id)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys and
    drive a counter-based Philox generator, so a given id always yields the same
    sequence regardless of which thread or in which order it is consumed.
    """

    master_seed: int
    stream_id: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ParameterError("master_seed must be an unsigned 64-bit integer")

    def child(self, *tags) -> RngStream:
        return RngStream(self.master_seed, self.stream_id + tuple(tags))

    def generator(self) -> np.random.Generator:
        key = tuple(_tag_code(t) for t in self.stream_id)
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PartitionPlan:
    gamma: float
    s: int
    n: int  # smallest subsample size, floor(N / s)
    assignment: np.ndarray = field(repr=False)  # point index -> subsample index

    @property
    def N(self) -> int:
        return int(self.assignment.shape[0])

    def groups(self) -> list[np.ndarray]:
        """Point indices of every subsample, each sorted ascending."""
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(np.bincount(self.assignment, minlength=self.s))[:-1]
        return np.split(order, bounds)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.s)


def num_subsamples(N: int, gamma: float) -> int:
    if not 0 <= gamma < 1:
        raise ParameterError(f"gamma must lie in [0, 1), got {gamma}")
    if N < 1:
        raise ParameterError("N must be positive")
    return min(N, max(1, round_half_up(N**gamma)))


def make_partition(dataset: Dataset | int, gamma: float, rng: RngStream) -> PartitionPlan:
    """Shuffle the points and deal them round-robin into ``round(N**gamma)`` subsamples."""
    N = dataset if isinstance(dataset, int) else dataset.size
    s = num_subsamples(N, gamma)
    perm = rng.generator().permutation(N)
    assignment = np.empty(N, dtype=np.int64)
    assignment[perm] = np.arange(N) % s
    assignment.setflags(write=False)
    return PartitionPlan(gamma=float(gamma), s=s, n=N // s, assignment=assignment)


def alpha_from_holder(alpha_H: float, d: int) -> float:
    """Convert a Hölder exponent in R^d into the smoothness exponent used for k selection."""
    if not alpha_H > 0:
        raise ParameterError(f"alpha_H must be positive, got {alpha_H}")
    if int(d) != d or d < 1:
        raise ParameterError(f"d must be a positive integer, got {d}")
    return alpha_H / d
