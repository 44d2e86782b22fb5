"""Versioned model container (``.npz`` with a JSON header).

The header names the format and version; arrays hold the training points, the
partition assignment, and for a denoised model the prediction subsamples with
their relabeled labels.
"""

from __future__ import annotations

import json

import numpy as np

from .core import DataError, PartitionPlan
from .denoise import DenoisedModel
from .ensemble import BigNnModel
from .knn_index import build_index

FORMAT = "bignn-model"
VERSION = 1


def save_model(path, model: BigNnModel, denoised: DenoisedModel | None = None) -> None:
    N = model.partition.N
    d = model.dim
    X = np.empty((N, d))
    y = np.empty(N, dtype=np.int8)
    for ix in model.local_indices:
        X[ix.ids] = ix.X
        y[ix.ids] = ix.y
    master, stream = model.seed if model.seed else (None, ())
    header = {
        "format": FORMAT,
        "version": VERSION,
        "kind": "denoised" if denoised is not None else "bignn",
        "gamma": model.gamma,
        "s": model.s,
        "k_local": model.k_local,
        "k_o": model.k_o,
        "partition_seed": {"master_seed": master, "stream_id": [str(t) for t in stream]},
        "index_kind": model.local_indices[0].kind,
        "N": N,
        "d": d,
    }
    arrays = {"X": X, "y": y, "assignment": np.asarray(model.partition.assignment)}
    if denoised is not None:
        header.update(m=denoised.m, theta=denoised.theta, I=denoised.I,
                      reuse_partition=denoised.reuse_partition)
        arrays["den_ids"] = np.concatenate([ix.ids for ix in denoised.subsamples])
        arrays["den_labels"] = np.concatenate([ix.y for ix in denoised.subsamples])
        arrays["den_offsets"] = np.cumsum([0] + [ix.size for ix in denoised.subsamples])
    arrays["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_model(path) -> tuple[BigNnModel, DenoisedModel | None]:
    try:
        with np.load(path, allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: not a readable model file ({exc})") from exc
    if "header" not in arrays:
        raise DataError(f"{path}: missing header")
    header = json.loads(arrays["header"].tobytes().decode())
    if header.get("format") != FORMAT:
        raise DataError(f"{path}: unknown format {header.get('format')!r}")
    if header.get("version") != VERSION:
        raise DataError(f"{path}: unsupported version {header.get('version')!r}")

    X, y, assignment = arrays["X"], arrays["y"], arrays["assignment"]
    s = int(header["s"])
    N = int(header["N"])
    plan = PartitionPlan(gamma=float(header["gamma"]), s=s, n=N // s, assignment=assignment)
    kind = header["index_kind"]
    indices = [build_index(X[g], y[g], ids=g, kind=kind) for g in plan.groups()]
    ps = header["partition_seed"]
    model = BigNnModel(indices, int(header["k_local"]), float(header["gamma"]), plan,
                       k_o=float(header["k_o"]),
                       seed=(ps["master_seed"], tuple(ps["stream_id"])) if ps["master_seed"] is not None else ())
    denoised = None
    if header["kind"] == "denoised":
        ids, labels, off = arrays["den_ids"], arrays["den_labels"], arrays["den_offsets"]
        subs = [build_index(X[ids[a:b]], labels[a:b], ids=ids[a:b], kind=kind)
                for a, b in zip(off[:-1], off[1:])]
        denoised = DenoisedModel(subs, int(header["m"]), float(header["theta"]),
                                 bool(header["reuse_partition"]))
    return model, denoised
