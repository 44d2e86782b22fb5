"""Experiment descriptions: JSON config files layered over named presets."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core import ConfigError
from ..ensemble import K_O_STAR
from ..synthgen import PRESETS as MODEL_PRESETS, GaussianClassModel

Kind = Literal["sim1", "sim2", "sim3", "denoise-bench", "real"]


class RealDatasetSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "dataset"
    path: str
    feature_columns: Optional[list[Union[int, str]]] = None
    label_column: Union[int, str] = -1
    label_map: Optional[dict[str, int]] = None
    header: Optional[bool] = None  # None: detect
    delimiter: str = ","
    expected_size: Optional[int] = None
    expected_dim: Optional[int] = None


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Kind
    model: Union[str, dict] = "sim1"
    dataset: Optional[RealDatasetSpec] = None
    N_grid: list[int] = Field(default_factory=list)
    gamma_grid: list[float]
    theta_grid: list[float] = Field(default_factory=list)
    I_grid: list[int] = Field(default_factory=list)
    k: Optional[int] = None
    alpha: Optional[float] = 0.2
    beta: float = 1.0
    k_o: float = 1.0
    k_o_star: float = K_O_STAR
    K_exponent: float = 0.7
    replications: int = Field(ge=1)
    master_seed: int = Field(default=20190507, ge=0, lt=2**64)
    test_size: Optional[int] = Field(default=None, ge=1)
    cv_folds: int = Field(default=5, ge=2)
    k_grid: list[int] = Field(default_factory=lambda: list(range(1, 52, 2)))
    reuse_partition: bool = False
    index: Literal["kdtree", "brute"] = "kdtree"
    threads: int = Field(default=1, ge=1)
    output: Optional[str] = None

    @field_validator("N_grid", "I_grid", "k_grid")
    @classmethod
    def _positive_ints(cls, v):
        if any(x < 1 for x in v):
            raise ValueError("grid values must be positive")
        return v

    @field_validator("gamma_grid")
    @classmethod
    def _gammas(cls, v):
        if not v:
            raise ValueError("gamma_grid must be nonempty")
        if any(not 0 <= g < 1 for g in v):
            raise ValueError("gamma values must lie in [0, 1)")
        return v

    @field_validator("theta_grid")
    @classmethod
    def _thetas(cls, v):
        if any(not 0 < t <= 1 for t in v):
            raise ValueError("theta values must lie in (0, 1]")
        return v

    @model_validator(mode="after")
    def _by_kind(self):
        if self.kind == "sim3":
            self.kind = "denoise-bench"
        if self.kind != "real" and not self.N_grid:
            raise ValueError("N_grid must be nonempty for synthetic experiments")
        if self.kind == "sim1" and (self.alpha is None or self.alpha <= 0):
            raise ValueError("sim1 needs a positive alpha")
        if self.kind == "sim2":
            if self.k is None:
                raise ValueError("sim2 needs a fixed k")
            if self.alpha is not None:
                limit = 2 * self.alpha / (2 * self.alpha + 1)
                bad = [g for g in self.gamma_grid if g >= limit]
                if bad:
                    raise ValueError(f"gamma values {bad} are not below 2a/(2a+1)={limit:.4f}; "
                                     "set alpha to null to run them anyway")
        if self.kind == "denoise-bench" and (not self.theta_grid or not self.I_grid):
            raise ValueError("denoise-bench needs theta_grid and I_grid")
        if self.kind == "real" and self.dataset is None:
            raise ValueError("real experiments need a dataset")
        if not self.k_o > 0 or not self.k_o_star > 0:
            raise ValueError("k_o and k_o_star must be positive")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be positive")
        return self

    def class_model(self) -> GaussianClassModel:
        if isinstance(self.model, str):
            if self.model not in MODEL_PRESETS:
                raise ConfigError(f"unknown model preset {self.model!r}")
            return MODEL_PRESETS[self.model]()
        try:
            return GaussianClassModel.from_dict(self.model)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model description: {exc}") from exc

    def synthetic_test_size(self) -> int:
        return self.test_size or 1000


_TENTHS = [round(0.1 * i, 1) for i in range(10)]

PRESETS: dict[str, dict] = {
    "sim1": dict(kind="sim1", model="sim1", gamma_grid=_TENTHS,
                 N_grid=[1000 * f for f in (1, 2, 3, 4, 8, 9, 16, 27, 32)],
                 alpha=0.2, k_o=1.0, replications=1000),
    "sim2": dict(kind="sim2", model="sim1", k=5, alpha=None, gamma_grid=_TENTHS[:8],
                 N_grid=[1000 * f for f in (1, 2, 4, 8, 10, 12, 16, 20, 32)], replications=1000),
    "sim3": dict(kind="denoise-bench", model="sim3", N_grid=[27000], gamma_grid=[0.2, 0.3],
                 I_grid=[5, 9, 13, 17, 21], theta_grid=_TENTHS[1:8], k_o_star=K_O_STAR,
                 K_exponent=0.7, replications=300),
    "sim1-desk": dict(kind="sim1", model="sim1", gamma_grid=[0.0, 0.2, 0.4],
                      N_grid=[1000, 2000, 4000, 8000, 16000], alpha=0.2, k_o=1.0, replications=100),
    "sim2-desk": dict(kind="sim2", model="sim1", k=5, alpha=None, gamma_grid=_TENTHS[:6],
                      N_grid=[1000, 4000, 16000], replications=100),
    "sim3-desk": dict(kind="denoise-bench", model="sim3", N_grid=[8000], gamma_grid=[0.2],
                      I_grid=[9], theta_grid=[0.2, 0.4, 0.6], replications=100),
    "real": dict(kind="real", gamma_grid=[0.1, 0.2, 0.3], replications=500),
}

DEFAULT_PRESET = {"sim1": "sim1", "sim2": "sim2", "denoise-bench": "sim3", "real": "real"}


def build_spec(kind: str | None = None, preset: str | None = None, config: dict | None = None,
               **overrides) -> ExperimentSpec:
    """Layer preset, config mapping and explicit overrides (later wins)."""
    config = dict(config or {})
    preset = preset or config.pop("preset", None) or DEFAULT_PRESET.get(kind or config.get("kind"))
    config.pop("preset", None)
    data: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        data.update(PRESETS[preset])
    data.update(config)
    data_path = overrides.pop("data_path", None)
    data.update({k: v for k, v in overrides.items() if v is not None})
    if data_path is not None:
        ds = data.get("dataset")
        ds = ds.model_dump() if isinstance(ds, RealDatasetSpec) else dict(ds or {})
        ds["path"] = str(data_path)
        data["dataset"] = ds
    if kind is not None:
        expected = "denoise-bench" if kind == "sim3" else kind
        got = data.get("kind")
        if got is not None and ("denoise-bench" if got == "sim3" else got) != expected:
            raise ConfigError(f"config describes a {got!r} experiment, not {kind!r}")
        data["kind"] = kind
    try:
        return ExperimentSpec(**data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_spec(path=None, *, kind: str | None = None, preset: str | None = None,
              **overrides) -> ExperimentSpec:
    config = None
    if path is not None:
        try:
            config = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(config, dict):
            raise ConfigError(f"{path}: top level must be an object")
    return build_spec(kind, preset, config, **overrides)
