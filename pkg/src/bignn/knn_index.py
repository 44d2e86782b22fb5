"""Exact Euclidean k-nearest-neighbor search.

Two interchangeable backends share one interface: :class:`KdTreeIndex` for speed
and :class:`BruteForceIndex` as the correctness oracle.  Both order neighbors by
the composite key ``(squared distance, original index)``; squared distances are
accumulated coordinate by coordinate in the same order in both backends, so their
outputs agree bit for bit, ties included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import Dataset, LabeledPoint, ParameterError

LEAF_SIZE = 16


@dataclass(frozen=True)
class NeighborSet:
    indices: np.ndarray  # original indices
    distances: np.ndarray
    labels: np.ndarray
    k: int

    def __len__(self) -> int:
        return len(self.indices)


def mean_label(neighbors: NeighborSet) -> float:
    if len(neighbors) == 0:
        raise RuntimeError("mean_label of an empty neighbor set")
    return float(np.mean(neighbors.labels, dtype=np.float64))


@numba.njit(cache=True, nogil=True)
def _insert(best_d2, best_id, best_pos, count, kk, d2, pid, pos):
    # insertion into a list sorted by (d2, id); caller guarantees it belongs
    j = count if count < kk else kk - 1
    while j > 0 and (best_d2[j - 1] > d2 or (best_d2[j - 1] == d2 and best_id[j - 1] > pid)):
        if j < kk:
            best_d2[j] = best_d2[j - 1]
            best_id[j] = best_id[j - 1]
            best_pos[j] = best_pos[j - 1]
        j -= 1
    best_d2[j] = d2
    best_id[j] = pid
    best_pos[j] = pos
    return count + 1 if count < kk else kk


@numba.njit(cache=True, nogil=True)
def _kdtree_query(points, ids, split_dim, split_val, left, right, start, end,
                  max_depth, Q, kk, out_pos, out_d2):
    d = points.shape[1]
    stack_node = np.empty(2 * max_depth + 4, dtype=np.int64)
    stack_bound = np.empty(2 * max_depth + 4, dtype=np.float64)
    best_d2 = np.empty(kk, dtype=np.float64)
    best_id = np.empty(kk, dtype=np.int64)
    best_pos = np.empty(kk, dtype=np.int64)
    visited = 0
    for qi in range(Q.shape[0]):
        q = Q[qi]
        count = 0
        top = 0
        stack_node[0] = 0
        stack_bound[0] = 0.0
        top = 1
        while top > 0:
            top -= 1
            node = stack_node[top]
            bound = stack_bound[top]
            # equality must still be explored: a tied point may carry a smaller id
            if count == kk and bound > best_d2[kk - 1]:
                continue
            if left[node] < 0:
                for p in range(start[node], end[node]):
                    acc = 0.0
                    for j in range(d):
                        t = q[j] - points[p, j]
                        acc += t * t
                    visited += 1
                    pid = ids[p]
                    if count < kk or acc < best_d2[kk - 1] or (
                            acc == best_d2[kk - 1] and pid < best_id[kk - 1]):
                        count = _insert(best_d2, best_id, best_pos, count, kk, acc, pid, p)
            else:
                diff = q[split_dim[node]] - split_val[node]
                if diff < 0.0:
                    near = left[node]
                    far = right[node]
                else:
                    near = right[node]
                    far = left[node]
                far_bound = diff * diff
                if far_bound < bound:
                    far_bound = bound
                stack_node[top] = far
                stack_bound[top] = far_bound
                top += 1
                stack_node[top] = near
                stack_bound[top] = bound
                top += 1
        for j in range(kk):
            out_pos[qi, j] = best_pos[j]
            out_d2[qi, j] = best_d2[j]
    return visited


def _sq_distances(points: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Squared distances (m, n), accumulated one coordinate at a time (matches the tree)."""
    out = np.zeros((Q.shape[0], points.shape[0]))
    t = np.empty_like(out)
    cols = np.ascontiguousarray(points.T)
    for j in range(points.shape[1]):
        np.subtract(Q[:, j, None], cols[j][None, :], out=t)
        np.multiply(t, t, out=t)
        out += t
    return out


class KnnIndex:
    """Common surface of both backends. Immutable after construction.

    ``n_queries`` counts query points answered (instrumentation only).
    """

    kind = "abstract"

    def __init__(self, X, y, ids=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ParameterError("index needs a nonempty 2-D point array")
        y = np.asarray(y, dtype=np.int8)
        if y.shape != (X.shape[0],):
            raise ParameterError("labels do not match points")
        ids = np.arange(X.shape[0], dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        if ids.shape != (X.shape[0],):
            raise ParameterError("ids do not match points")
        self.X = X
        self.y = y
        self.ids = ids
        self.n_queries = 0
        for a in (self.X, self.y, self.ids):
            a.setflags(write=False)

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def _check(self, Q, k) -> np.ndarray:
        if int(k) != k or k < 1:
            raise ParameterError(f"k must be a positive integer, got {k}")
        Q = np.ascontiguousarray(Q, dtype=np.float64)
        if Q.ndim == 1:
            Q = Q[None, :]
        if Q.ndim != 2 or Q.shape[1] != self.dim:
            raise ParameterError(f"query dimension {Q.shape[-1]} does not match index dimension {self.dim}")
        return Q

    def query_batch(self, Q, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Positions (into this index) and squared distances, shape (m, min(k, size))."""
        raise NotImplementedError

    def query(self, x, k: int) -> NeighborSet:
        pos, d2 = self.query_batch(x, k)
        pos, d2 = pos[0], d2[0]
        return NeighborSet(self.ids[pos], np.sqrt(d2), self.y[pos], int(k))

    def neighbor_labels(self, Q, k: int) -> np.ndarray:
        pos, _ = self.query_batch(Q, k)
        return self.y[pos]


class BruteForceIndex(KnnIndex):
    kind = "brute"

    def query_batch(self, Q, k):
        Q = self._check(Q, k)
        kk = min(int(k), self.size)
        pos = np.empty((Q.shape[0], kk), dtype=np.int64)
        d2 = np.empty((Q.shape[0], kk))
        block = max(1, 2**16 // self.size)  # keep the distance block cache-sized
        for b0 in range(0, Q.shape[0], block):
            D = _sq_distances(self.X, Q[b0:b0 + block])
            cutoffs = np.partition(D, kk - 1, axis=1)[:, kk - 1]
            for i, (dist, cutoff) in enumerate(zip(D, cutoffs), start=b0):
                # every point at or inside the kk-th smallest distance, then exact order
                cand = np.flatnonzero(dist <= cutoff)
                order = cand[np.lexsort((self.ids[cand], dist[cand]))[:kk]]
                pos[i] = order
                d2[i] = dist[order]
        self.n_queries += Q.shape[0]
        return pos, d2


class KdTreeIndex(KnnIndex):
    """kd-tree: median split on the widest-spread coordinate, leaves of at most 16 points."""

    kind = "kdtree"

    def __init__(self, X, y, ids=None, leaf_size: int = LEAF_SIZE):
        super().__init__(X, y, ids)
        self.leaf_size = leaf_size
        self.points_visited = 0
        self._build()

    def _build(self):
        X = self.X
        order = np.arange(self.size)
        split_dim, split_val, left, right, start, end = [], [], [], [], [], []
        max_depth = 0
        # iterative build; stack holds (node id, lo, hi, depth)
        def new_node(lo, hi):
            for lst, v in ((split_dim, -1), (split_val, 0.0), (left, -1), (right, -1), (start, lo), (end, hi)):
                lst.append(v)
            return len(start) - 1

        stack = [(new_node(0, self.size), 0, self.size, 0)]
        while stack:
            node, lo, hi, depth = stack.pop()
            max_depth = max(max_depth, depth)
            if hi - lo <= self.leaf_size:
                continue
            sub = X[order[lo:hi]]
            spread = sub.max(axis=0) - sub.min(axis=0)
            dim = int(np.argmax(spread))
            if spread[dim] <= 0:
                continue  # all points identical: keep as one leaf
            mid = (hi - lo) // 2
            part = np.argpartition(sub[:, dim], mid)
            order[lo:hi] = order[lo:hi][part]
            # left holds values <= split, right values >= split
            split_dim[node] = dim
            split_val[node] = X[order[lo + mid], dim]
            left[node] = new_node(lo, lo + mid)
            right[node] = new_node(lo + mid, hi)
            stack.append((left[node], lo, lo + mid, depth + 1))
            stack.append((right[node], lo + mid, hi, depth + 1))

        self._perm = order
        self._points = np.ascontiguousarray(X[order])
        self._ids = np.ascontiguousarray(self.ids[order])
        self._split_dim = np.asarray(split_dim, dtype=np.int64)
        self._split_val = np.asarray(split_val, dtype=np.float64)
        self._left = np.asarray(left, dtype=np.int64)
        self._right = np.asarray(right, dtype=np.int64)
        self._start = np.asarray(start, dtype=np.int64)
        self._end = np.asarray(end, dtype=np.int64)
        self.max_depth = max_depth

    @property
    def n_nodes(self) -> int:
        return len(self._start)

    def leaf_membership(self) -> np.ndarray:
        """How many leaves hold each backing point (always exactly one)."""
        counts = np.zeros(self.size, dtype=np.int64)
        for node in np.flatnonzero(self._left < 0):
            counts[self._perm[self._start[node]:self._end[node]]] += 1
        return counts

    def query_batch(self, Q, k):
        Q = self._check(Q, k)
        kk = min(int(k), self.size)
        pos = np.empty((Q.shape[0], kk), dtype=np.int64)
        d2 = np.empty((Q.shape[0], kk))
        self.points_visited += _kdtree_query(
            self._points, self._ids, self._split_dim, self._split_val, self._left,
            self._right, self._start, self._end, self.max_depth, Q, kk, pos, d2)
        self.n_queries += Q.shape[0]
        return self._perm[pos], d2


INDEX_KINDS = {"kdtree": KdTreeIndex, "brute": BruteForceIndex}


def build_index(points, labels=None, ids=None, kind: str = "kdtree") -> KnnIndex:
    """Build an index from a :class:`Dataset`, a list of :class:`LabeledPoint`, or arrays."""
    if kind not in INDEX_KINDS:
        raise ParameterError(f"unknown index kind {kind!r}")
    if isinstance(points, Dataset):
        X, y = points.X, points.y
    elif labels is None:
        points = list(points)
        if not points:
            raise ParameterError("cannot index an empty point list")
        if not all(isinstance(p, LabeledPoint) for p in points):
            raise ParameterError("labels are required unless LabeledPoint objects are given")
        dims = {len(p.features) for p in points}
        if len(dims) != 1:
            raise ParameterError(f"inconsistent point dimensions: {sorted(dims)}")
        X = np.array([p.features for p in points], dtype=np.float64)
        y = np.array([p.label for p in points], dtype=np.int8)
    else:
        X, y = np.asarray(points, dtype=np.float64), labels
    if len(X) == 0:
        raise ParameterError("cannot index an empty point list")
    return INDEX_KINDS[kind](X, y, ids)


def query_knn(index: KnnIndex, x, k: int) -> NeighborSet:
    return index.query(x, k)
