"""Replication orchestration for the synthetic studies and the real-data comparison.

Every replication draws its data from its own :class:`RngStream`, keyed by
(purpose, N, replication) and never by gamma, so all gamma levels of one
replication see the same training and test sets.  Results are sorted before
they are returned, so the worker count never changes the output.

Timing follows the simulated distributed setting: each subsample is one
machine, so a bigNN phase costs the coordinator's work plus the slowest
machine.  With ``gamma = 0`` this is simply the oracle kNN's single-machine time.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core import ConfigError, Dataset, RngStream, num_subsamples
from ..denoise import predict_denoised_batch, pretrain, prediction_size
from ..ensemble import (FixedK, OracleDividedK, Sim3K, TheoryK, divide_oracle_k, majority,
                        select_k, select_k_sim3, train, tune_k_cv, vote_matrix)
from ..metrics import disagreement, empirical_risk, excess_risk
from ..synthgen import eta, sample
from .config import ExperimentSpec
from .ingest import load_csv, real_test_size

log = logging.getLogger(__name__)


@dataclass
class Timed:
    labels: np.ndarray
    train_ms: float
    predict_ms: float


def fit_and_predict(data: Dataset, gamma: float, k_rule, rng: RngStream, X_test,
                    index_kind: str = "kdtree") -> tuple:
    """Train bigNN and classify ``X_test``; times use the per-machine critical path."""
    model = train(data, gamma, k_rule, rng, index_kind=index_kind)
    train_ms = 1e3 * (model.partition_seconds + max(model.build_seconds))
    per_machine: list[float] = []
    votes = vote_matrix(model, X_test, timings=per_machine)
    t = time.perf_counter()
    labels = majority(votes)
    predict_ms = 1e3 * (max(per_machine) + time.perf_counter() - t)
    return model, Timed(labels, train_ms, predict_ms)


def _warm_up(index_kind: str) -> None:
    # JIT/cache load happens here, outside every timed region
    gen = np.random.default_rng(0)
    data = Dataset(gen.normal(size=(64, 2)), gen.integers(0, 2, 64))
    fit_and_predict(data, 0.3, FixedK(3), RngStream(0), data.X[:4], index_kind)


def _run_tasks(fn, tasks, threads: int) -> list[dict]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(fn, tasks))
    else:
        chunks = [fn(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=sort_key)
    return rows


def sort_key(r: dict):
    none = -1.0
    return (r["method"], r["gamma"], r["N"],
            none if r.get("theta") is None else r["theta"],
            none if r.get("I") is None else r["I"], r["rep"])


def _pairs(replications: int) -> list[list[int]]:
    return [list(range(p, min(p + 2, replications))) for p in range(0, replications, 2)]


# ---------------------------------------------------------------- validation

def k_rule_for(spec: ExperimentSpec):
    if spec.kind == "sim1":
        return TheoryK(spec.alpha, spec.k_o)
    if spec.kind == "sim2":
        return FixedK(spec.k)
    if spec.kind == "denoise-bench":
        return Sim3K(spec.K_exponent, spec.k_o_star)
    raise ConfigError(f"no fixed k rule for {spec.kind!r}")


def _planned_k(spec: ExperimentSpec, N: int, gamma: float) -> tuple[int, int, int]:
    s = num_subsamples(N, gamma)
    n = N // s
    if spec.kind == "sim1":
        k = select_k(spec.alpha, n, s, spec.k_o)
    elif spec.kind == "sim2":
        k = spec.k
    else:
        k = select_k_sim3(N, s, spec.K_exponent, spec.k_o_star)
    return s, n, k


def validate(spec: ExperimentSpec, N_real: int | None = None) -> list[tuple]:
    """Check every grid cell before anything runs; returns (N, gamma, s, n, k) per cell."""
    cells = []
    if spec.kind == "real":
        N_train = N_real - (spec.test_size or real_test_size(N_real))
        if N_train < 2:
            raise ConfigError(f"dataset of {N_real} rows is too small")
        half = N_train // 2
        fold_train = half - -(-half // spec.cv_folds)
        if max(spec.k_grid) > fold_train:
            raise ConfigError(f"max(k_grid)={max(spec.k_grid)} exceeds the smallest CV training fold ({fold_train})")
        for g in spec.gamma_grid:
            s = num_subsamples(half, g)
            n = half // s
            k = divide_oracle_k(max(spec.k_grid), s)
            if k > n:
                raise ConfigError(f"gamma={g}: k={k} exceeds subsample size {n} of a {half}-point half")
            cells.append((N_train, g, s, n, k))
        return cells
    for N in spec.N_grid:
        for g in spec.gamma_grid:
            s, n, k = _planned_k(spec, N, g)
            if k > n:
                raise ConfigError(f"N={N}, gamma={g}: k_local={k} exceeds smallest subsample size {n} (s={s})")
            cells.append((N, g, s, n, k))
        if spec.kind == "denoise-bench":
            for th in spec.theta_grid:
                prediction_size(N, th)
    return cells


# ---------------------------------------------------------------- synthetic

def run_synthetic(spec: ExperimentSpec) -> list[dict]:
    """Simulations 1 and 2: bigNN risk/regret per replication, CIS per replication pair."""
    if spec.kind not in ("sim1", "sim2"):
        raise ConfigError(f"run_synthetic cannot run {spec.kind!r}")
    validate(spec)
    cmodel = spec.class_model()
    rule = k_rule_for(spec)
    root = RngStream(spec.master_seed)
    test_size = spec.synthetic_test_size()
    _warm_up(spec.index)

    def task(args):
        N, pair_id, reps = args
        test = sample(cmodel, test_size, root.child("test", N, pair_id))
        eta_test = eta(cmodel, test.X)
        train_sets = {r: sample(cmodel, N, root.child("train", N, r)) for r in reps}
        rows = []
        for g in spec.gamma_grid:
            preds = {}
            for r in reps:
                model, res = fit_and_predict(train_sets[r], g, rule, root.child("partition", N, r),
                                             test.X, spec.index)
                preds[r] = res.labels
                rows.append(dict(method="bignn", N=N, gamma=g, theta=None, I=None, k=model.k_local,
                                 rep=r, risk=empirical_risk(res.labels, test.y),
                                 regret=excess_risk(res.labels, eta_test), cis=None,
                                 train_ms=res.train_ms, predict_ms=res.predict_ms,
                                 seed=spec.master_seed))
            if len(reps) == 2:
                c = disagreement(preds[reps[0]], preds[reps[1]])
                for row in rows[-2:]:
                    row["cis"] = c
        return rows

    tasks = [(N, i, reps) for N in spec.N_grid for i, reps in enumerate(_pairs(spec.replications))]
    log.info("%s: %d tasks", spec.kind, len(tasks))
    return _run_tasks(task, tasks, spec.threads)


def run_sim1(spec: ExperimentSpec) -> list[dict]:
    return run_synthetic(spec)


def run_sim2(spec: ExperimentSpec) -> list[dict]:
    return run_synthetic(spec)


def gamma_slopes(rows: list[dict], value: str = "regret") -> dict[int, float]:
    """Per-N least-squares slope of mean log(value) against gamma."""
    out = {}
    for N in sorted({r["N"] for r in rows}):
        gs = sorted({r["gamma"] for r in rows if r["N"] == N})
        means = [np.mean([r[value] for r in rows if r["N"] == N and r["gamma"] == g
                          and r[value] is not None]) for g in gs]
        out[N] = float(np.polyfit(gs, np.log(means), 1)[0])
    return out


def run_denoise_bench(spec: ExperimentSpec) -> list[dict]:
    """bigNN against its pre-trained 1-NN acceleration over the (theta, I) grid."""
    validate(spec)
    cmodel = spec.class_model()
    rule = k_rule_for(spec)
    root = RngStream(spec.master_seed)
    test_size = spec.synthetic_test_size()
    _warm_up(spec.index)

    def task(args):
        N, r = args
        data = sample(cmodel, N, root.child("train", N, r))
        test = sample(cmodel, test_size, root.child("test", N, r))
        eta_test = eta(cmodel, test.X)
        rows = []
        base = dict(N=N, rep=r, cis=None, seed=spec.master_seed)
        for g in spec.gamma_grid:
            model, res = fit_and_predict(data, g, rule, root.child("partition", N, r), test.X, spec.index)
            rows.append(dict(base, method="bignn", gamma=g, theta=None, I=None, k=model.k_local,
                             risk=empirical_risk(res.labels, test.y),
                             regret=excess_risk(res.labels, eta_test),
                             train_ms=res.train_ms, predict_ms=res.predict_ms))
            for th in spec.theta_grid:
                for I in spec.I_grid:
                    dm = pretrain(model, data, th, I, root.child("denoise", N, r, g, th, I),
                                  reuse_partition=spec.reuse_partition, index_kind=spec.index)
                    t = time.perf_counter()
                    labels = predict_denoised_batch(dm, test.X)
                    predict_ms = 1e3 * (time.perf_counter() - t)
                    rows.append(dict(base, method="denoised", gamma=g, theta=th, I=I, k=model.k_local,
                                     risk=empirical_risk(labels, test.y),
                                     regret=excess_risk(labels, eta_test),
                                     train_ms=res.train_ms + 1e3 * dm.pretrain_seconds,
                                     predict_ms=predict_ms))
        return rows

    tasks = [(N, r) for N in spec.N_grid for r in range(spec.replications)]
    return _run_tasks(task, tasks, spec.threads)


# ---------------------------------------------------------------- real data

def run_real(spec: ExperimentSpec, dataset: Dataset | None = None) -> list[dict]:
    """Oracle kNN (CV-tuned k) against bigNN (k divided by s) on a real dataset.

    Each replication redraws the train/test split; CIS compares classifiers fit
    to two disjoint halves of that replication's training pool.
    """
    if dataset is None:
        dataset = load_csv(spec.dataset.path, spec.dataset)
    N = dataset.size
    validate(spec, N)
    test_size = spec.test_size or real_test_size(N)
    root = RngStream(spec.master_seed)
    _warm_up(spec.index)

    def task(r):
        gen = root.child("split", r).generator()
        perm = gen.permutation(N)
        test, pool = dataset.subset(perm[:test_size]), dataset.subset(perm[test_size:])
        halves = np.array_split(root.child("halves", r).generator().permutation(pool.size), 2)
        k_oracle = tune_k_cv(pool, spec.cv_folds, spec.k_grid, root.child("cv", r), spec.index)
        rows = []
        for method, g in [("oracle_knn", 0.0)] + [("bignn", g) for g in spec.gamma_grid]:
            rule = FixedK(k_oracle) if method == "oracle_knn" else OracleDividedK(k_oracle)
            model, res = fit_and_predict(pool, g, rule, root.child("partition", r), test.X, spec.index)
            side = [fit_and_predict(pool.subset(h), g, rule, root.child("partition-half", r, i),
                                    test.X, spec.index)[1].labels for i, h in enumerate(halves)]
            rows.append(dict(method=method, N=pool.size, gamma=g, theta=None, I=None, k=model.k_local,
                             rep=r, risk=empirical_risk(res.labels, test.y), regret=None,
                             cis=disagreement(side[0], side[1]),
                             train_ms=res.train_ms, predict_ms=res.predict_ms, seed=spec.master_seed))
        return rows

    return _run_tasks(task, list(range(spec.replications)), spec.threads)


def speedups(rows: list[dict]) -> dict[float, float]:
    """Mean oracle (train + predict) time over mean bigNN time, per gamma."""
    def total(sel):
        return float(np.mean([r["train_ms"] + r["predict_ms"] for r in sel]))

    oracle = [r for r in rows if r["method"] == "oracle_knn" or (r["method"] == "bignn" and r["gamma"] == 0)]
    if not oracle:
        return {}
    t0 = total(oracle)
    return {g: t0 / total([r for r in rows if r["method"] == "bignn" and r["gamma"] == g])
            for g in sorted({r["gamma"] for r in rows if r["method"] == "bignn" and r["gamma"] > 0})}


def summarize(rows: list[dict]) -> list[dict]:
    """Per (method, gamma, N, theta, I) means of risk, regret, cis and timings."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["method"], r["gamma"], r["N"], r.get("theta"), r.get("I")), []).append(r)
    out = []
    for (method, g, N, th, I), rs in groups.items():
        entry = dict(method=method, gamma=g, N=N, theta=th, I=I, reps=len(rs))
        for f in ("risk", "regret", "cis", "train_ms", "predict_ms"):
            vals = [r[f] for r in rs if r.get(f) is not None]
            entry[f] = float(np.mean(vals)) if vals else None
        out.append(entry)
    return out


RUNNERS = {"sim1": run_sim1, "sim2": run_sim2, "denoise-bench": run_denoise_bench, "real": run_real}


def run(spec: ExperimentSpec) -> list[dict]:
    return RUNNERS[spec.kind](spec)
