"""Pre-trained 1-NN acceleration of a bigNN model.

Training points are relabeled with the ensemble's own predictions; a query is then
answered by a 1-NN lookup in each of ``I`` small subsamples (size ``m = N**theta``)
followed by a strict majority vote.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, ParameterError, RngStream, round_half_up
from .ensemble import BigNnModel, majority, predict_batch
from .knn_index import KnnIndex, build_index


@dataclass
class DenoisedModel:
    subsamples: list[KnnIndex]  # labels are relabeled predictions
    m: int
    theta: float
    reuse_partition: bool = False
    pretrain_seconds: float = field(default=0.0, repr=False, compare=False)

    @property
    def I(self) -> int:
        return len(self.subsamples)

    @property
    def dim(self) -> int:
        return self.subsamples[0].dim

    @property
    def n_queries(self) -> int:
        return sum(ix.n_queries for ix in self.subsamples)


def prediction_size(N: int, theta: float) -> int:
    if not 0 < theta <= 1:
        raise ParameterError(f"theta must lie in (0, 1], got {theta}")
    return min(N, max(1, round_half_up(N**theta)))


def _merged_groups(model: BigNnModel, m: int, I: int) -> list[np.ndarray]:
    # consecutive training subsamples glued together until they reach about m points
    groups = model.partition.groups()
    s = len(groups)
    per = min(s, max(1, round_half_up(m / max(1, model.partition.n))))
    return [np.sort(np.concatenate([groups[(i * per + t) % s] for t in range(per)]))
            for i in range(I)]


def pretrain(model: BigNnModel, dataset: Dataset, theta: float, I: int, rng: RngStream, *,
             reuse_partition: bool = False, index_kind: str = "kdtree") -> DenoisedModel:
    """Draw ``I`` subsamples of size ``round(N**theta)`` and relabel them with ``model``.

    With ``reuse_partition`` the prediction subsamples are unions of adjacent
    training subsamples instead of fresh draws without replacement.
    """
    if int(I) != I or I < 1:
        raise ParameterError(f"I must be a positive integer, got {I}")
    t0 = time.perf_counter()
    N = dataset.size
    m = prediction_size(N, theta)
    if reuse_partition:
        draws = _merged_groups(model, m, I)
    else:
        gen = rng.generator()
        draws = [np.sort(gen.choice(N, size=m, replace=False)) for _ in range(I)]
    # relabel only sampled points, each once
    needed = np.unique(np.concatenate(draws))
    relabeled = np.empty(N, dtype=np.int8)
    relabeled[needed] = predict_batch(model, dataset.X[needed])
    subsamples = [build_index(dataset.X[idx], relabeled[idx], ids=idx, kind=index_kind)
                  for idx in draws]
    return DenoisedModel(subsamples, m, float(theta), reuse_partition,
                         time.perf_counter() - t0)


def predict_denoised_batch(dmodel: DenoisedModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    votes = np.stack([ix.neighbor_labels(X, 1)[:, 0] for ix in dmodel.subsamples])
    return majority(votes)


def predict_denoised(dmodel: DenoisedModel, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != dmodel.dim:
        raise ParameterError(f"query dimension {x.shape} does not match model dimension {dmodel.dim}")
    return int(predict_denoised_batch(dmodel, x[None, :])[0])
