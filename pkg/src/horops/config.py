"""Experiment configuration: a versioned JSON schema validated with pydantic."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, field_validator, model_validator

from .groups import BUILTIN, builtin
from .orbit import DEFAULT_CAP, GroupPresentation
from .weyl import Functional, Theta

SCHEMA_VERSION = "1"


class ConfigError(ValueError):
    """Unreadable or invalid experiment configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BuiltinGroup(_Strict):
    builtin: str

    @field_validator("builtin")
    @classmethod
    def _known(cls, v):
        if v not in BUILTIN:
            raise ValueError(f"unknown built-in group {v!r}; choose from {sorted(BUILTIN)}")
        return v


class ExplicitGroup(_Strict):
    generators: list[list[list[float]]]
    labels: list[str] = []
    name: str = "group"


class BallSettings(_Strict):
    max_word_length: int = Field(ge=0)
    dedup_tol: PositiveFloat = 1e-6
    cap: PositiveInt = DEFAULT_CAP


class ShadowSettings(_Strict):
    R_grid: list[PositiveFloat] = [0.5, 1.0, 2.0, 5.0]
    margin_floor: PositiveFloat = 0.1
    conical_R: PositiveFloat = 3.0
    min_chain: PositiveInt = 5
    directions: PositiveInt = 100


class MeasureSettings(_Strict):
    s: Optional[PositiveFloat] = None
    s_offset: PositiveFloat = 0.05
    h_mode: str = "constant"


class ShadowLemmaSettings(_Strict):
    R: PositiveFloat = 10.0
    lengths: list[int] = [4, 5, 6, 7, 8, 9, 10]
    per_length: PositiveInt = 5
    compare_word_length: Optional[int] = None


class ProbeSettings(_Strict):
    count: PositiveInt = 64
    seed: int = 7
    depth: PositiveInt = 6


class ExperimentConfig(_Strict):
    schema_version: Literal["1"]
    group: Union[BuiltinGroup, ExplicitGroup]
    theta: Optional[list[int]] = None
    phi: Optional[dict[int, float]] = None
    ball: BallSettings
    shadows: ShadowSettings = ShadowSettings()
    measure: MeasureSettings = MeasureSettings()
    shadow_lemma: ShadowLemmaSettings = ShadowLemmaSettings()
    seed: int = Field(default=0, ge=0, lt=2**64)
    probes: ProbeSettings = ProbeSettings()

    @model_validator(mode="after")
    def _consistent(self):
        # building the objects runs their own validation (dimensions, det 1, ...)
        self.build()
        return self

    def build(self) -> tuple[GroupPresentation, Theta, Functional]:
        """The presentation, theta and phi this configuration describes."""
        if isinstance(self.group, BuiltinGroup):
            P, theta, phi = builtin(self.group.builtin)
        else:
            P = GroupPresentation(tuple(np.array(g) for g in self.group.generators), tuple(self.group.labels), self.group.name)
            theta, phi = Theta.full(P.dim), Functional({1: 1.0})
        if self.theta is not None:
            theta = Theta(P.dim, tuple(sorted(self.theta)))
        if self.phi is not None:
            phi = Functional(dict(self.phi))
        return P, theta, phi

    @property
    def group_name(self) -> str:
        return self.group.builtin if isinstance(self.group, BuiltinGroup) else self.group.name


def parse_config(obj) -> ExperimentConfig:
    """Validate a decoded JSON object; every failure becomes ConfigError."""
    try:
        return ExperimentConfig.model_validate(obj)
    except (ValidationError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Read a JSON config from disk, or a shipped example as ``builtin:<name>``."""
    text = str(path)
    try:
        if text.startswith("builtin:"):
            raw = example_config_text(text.split(":", 1)[1])
        else:
            raw = Path(text).read_text()
        obj = json.loads(raw)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read config {text}: {exc}") from exc
    return parse_config(obj)


EXAMPLE_CONFIGS = ("cyclic", "schottky", "punctured-torus", "example59", "sym2-schottky")


def example_config_text(name: str) -> str:
    if name not in EXAMPLE_CONFIGS:
        raise KeyError(f"no shipped config {name!r}; choose from {list(EXAMPLE_CONFIGS)}")
    return resources.files("horops").joinpath("configs").joinpath(f"{name}.json").read_text()
