"""Gaussian-mixture class models with exact posterior and Bayes-risk oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr

from .core import Dataset, ParameterError, RngStream


@dataclass(frozen=True)
class Component:
    mean: tuple[float, ...]
    scale: float  # covariance = scale * identity
    weight: float = 1.0


@dataclass(frozen=True)
class GaussianClassModel:
    d: int
    class1: tuple[Component, ...]
    class0: tuple[Component, ...]
    pi1: float

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError("dimension must be positive")
        if not 0 <= self.pi1 <= 1:
            raise ParameterError(f"pi1 must lie in [0, 1], got {self.pi1}")
        for name, comps in (("class1", self.class1), ("class0", self.class0)):
            if not comps:
                raise ParameterError(f"{name} needs at least one component")
            if abs(sum(c.weight for c in comps) - 1.0) > 1e-9:
                raise ParameterError(f"{name} component weights must sum to 1")
            for c in comps:
                if len(c.mean) != self.d:
                    raise ParameterError(f"{name} mean has dimension {len(c.mean)}, expected {self.d}")
                if not c.scale > 0 or not c.weight > 0:
                    raise ParameterError(f"{name} scales and weights must be positive")

    @classmethod
    def from_dict(cls, cfg: dict) -> GaussianClassModel:
        d = int(cfg["d"])

        def comps(items):
            out = []
            for c in items:
                mean = c["mean"]
                mean = (float(mean),) * d if np.isscalar(mean) else tuple(float(v) for v in mean)
                out.append(Component(mean, float(c.get("scale", 1.0)), float(c.get("weight", 1.0))))
            return tuple(out)

        return cls(d, comps(cfg["class1"]), comps(cfg["class0"]), float(cfg["pi1"]))

    def to_dict(self) -> dict:
        def comps(items):
            return [{"mean": list(c.mean), "scale": c.scale, "weight": c.weight} for c in items]

        return {"d": self.d, "class1": comps(self.class1), "class0": comps(self.class0), "pi1": self.pi1}


def sim1_model(d: int = 5) -> GaussianClassModel:
    """N(0_d, I) against N(1_d, I) with equal priors."""
    return GaussianClassModel(
        d, (Component((1.0,) * d, 1.0),), (Component((0.0,) * d, 1.0),), 0.5)


def sim3_model(d: int = 8) -> GaussianClassModel:
    """Two-component mixtures per class, class 1 prior 1/3."""
    return GaussianClassModel(
        d,
        (Component((0.0,) * d, 1.0, 0.5), Component((3.0,) * d, 2.0, 0.5)),
        (Component((1.5,) * d, 1.0, 0.5), Component((4.5,) * d, 2.0, 0.5)),
        1.0 / 3.0,
    )


PRESETS = {"sim1": sim1_model, "sim3": sim3_model}


def _draw(components, count: int, d: int, gen: np.random.Generator) -> np.ndarray:
    weights = np.array([c.weight for c in components])
    which = gen.choice(len(components), size=count, p=weights / weights.sum())
    means = np.array([c.mean for c in components])
    sds = np.sqrt([c.scale for c in components])
    return means[which] + sds[which, None] * gen.standard_normal((count, d))


def sample(model: GaussianClassModel, N: int, rng: RngStream) -> Dataset:
    if N < 1:
        raise ParameterError("N must be positive")
    gen = rng.generator()
    y = (gen.random(N) < model.pi1).astype(np.int8)
    X = np.empty((N, model.d))
    n1 = int(y.sum())
    X[y == 1] = _draw(model.class1, n1, model.d, gen)
    X[y == 0] = _draw(model.class0, N - n1, model.d, gen)
    return Dataset(X, y)


def _log_mixture(components, X: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    terms = []
    for c in components:
        sq = np.sum((X - np.asarray(c.mean)) ** 2, axis=1)
        terms.append(math.log(c.weight) - 0.5 * d * math.log(2 * math.pi * c.scale) - 0.5 * sq / c.scale)
    return logsumexp(np.stack(terms), axis=0)


def log_odds(model: GaussianClassModel, X) -> np.ndarray:
    """log(pi1 p1(x)) - log(pi0 p0(x)); +/-inf at degenerate priors."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.d:
        raise ParameterError(f"point dimension {X.shape[1]} does not match model dimension {model.d}")
    with np.errstate(divide="ignore"):
        lp1 = np.log(model.pi1) + _log_mixture(model.class1, X)
        lp0 = np.log1p(-model.pi1) + _log_mixture(model.class0, X)
    return lp1 - lp0


def eta(model: GaussianClassModel, X):
    """Posterior P(Y=1 | X=x). Returns a float for a single point."""
    single = np.ndim(X) == 1
    z = log_odds(model, X)
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-z))
    return float(out[0]) if single else out


def bayes_classify(model: GaussianClassModel, X):
    single = np.ndim(X) == 1
    labels = (eta(model, np.atleast_2d(X)) > 0.5).astype(np.int8)
    return int(labels[0]) if single else labels


def closed_form_bayes_risk(model: GaussianClassModel) -> float | None:
    """Exact Bayes risk for one Gaussian per class with a shared scale, else ``None``."""
    if len(model.class1) != 1 or len(model.class0) != 1:
        return None
    c1, c0 = model.class1[0], model.class0[0]
    if c1.scale != c0.scale:
        return None
    p1, p0 = model.pi1, 1.0 - model.pi1
    if p1 == 0.0 or p0 == 0.0:
        return 0.0
    delta = math.dist(c1.mean, c0.mean) / math.sqrt(c1.scale)
    if delta == 0.0:
        # constant posterior: predict 1 only when pi1 > 1/2
        return p0 if p1 > 0.5 else p1
    c = math.log(p1 / p0)
    return float(p1 * ndtr(-delta / 2 - c / delta) + p0 * ndtr(-delta / 2 + c / delta))


def bayes_risk(model: GaussianClassModel, mc_samples: int, rng: RngStream,
               chunk: int = 200_000) -> tuple[float, float, float | None]:
    """Monte-Carlo Bayes risk ``(estimate, standard error, closed form or None)``."""
    if mc_samples < 1:
        raise ParameterError("mc_samples must be positive")
    errors = 0
    for i, start in enumerate(range(0, mc_samples, chunk)):
        data = sample(model, min(chunk, mc_samples - start), rng.child(i))
        errors += int(np.sum(bayes_classify(model, data.X) != data.y))
    est = errors / mc_samples
    se = math.sqrt(est * (1 - est) / mc_samples)
    return est, se, closed_form_bayes_risk(model)
