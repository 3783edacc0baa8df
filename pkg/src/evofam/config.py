"""Run configuration for the command line interface (JSON)."""
from __future__ import annotations

import hashlib
import json
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RobinConfig(_Model):
    kind: Literal["robin"]
    n_elems: int = Field(32, ge=2)
    beta_base: float = 1.0
    beta_amp: float = 1.0
    holder: float = Field(0.75, gt=0.25, le=1.0)
    horizon: PositiveFloat = 1.0
    gamma: Optional[float] = None
    shift: float = 0.0


class SchrodingerConfig(_Model):
    kind: Literal["schrodinger"]
    n_elems: int = Field(32, ge=2)
    half_width: PositiveFloat = 1.0
    mu_base: float = 1.0
    mu_amp: float = 0.5
    mu_freq: float = 1.0
    horizon: PositiveFloat = 1.0
    sobolev_index: float = Field(0.5, gt=0.0, lt=1.0)
    shift: float = 0.0


class RandomConfig(_Model):
    kind: Literal["random"]
    n: int = Field(6, ge=2)
    seed: int = 0
    smoothness: Literal["lipschitz", "holder"] = "lipschitz"
    holder: float = Field(0.75, gt=0.0, le=1.0)
    horizon: PositiveFloat = 1.0
    stiffness: float = Field(100.0, gt=2.0)
    shift: float = 0.0


class FileConfig(_Model):
    kind: Literal["file"]
    path: str
    shift: float = 0.0


ProblemConfig = Annotated[
    Union[RobinConfig, SchrodingerConfig, RandomConfig, FileConfig], Field(discriminator="kind")
]


class SubdivisionConfig(_Model):
    cells: PositiveInt = 8
    kind: Literal["uniform", "random"] = "random"
    points: Optional[list[float]] = None


class Tolerances(_Model):
    exp: PositiveFloat = 1e-12
    ref: PositiveFloat = 1e-8


class SolveConfig(_Model):
    x0: Optional[list[float]] = None
    times: Optional[list[float]] = None
    samples: PositiveInt = 11


class ConvergeConfig(_Model):
    t: Optional[float] = None
    s: float = 0.0
    levels: list[PositiveInt] = [2, 4, 8, 16, 32, 64]
    max_level: int = Field(20, ge=2, le=24)

    @model_validator(mode="after")
    def _increasing(self):
        if not self.levels or any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("levels must be a nonempty strictly increasing list")
        return self


class Thresholds(_Model):
    identity: float = Field(0.0, ge=0.0)
    cocycle: PositiveFloat = 1e-10
    duality: PositiveFloat = 1e-9
    agreement: PositiveFloat = 1e-9
    rescaling: PositiveFloat = 1e-11


class VerifyConfig(_Model):
    pairs: PositiveInt = 10
    triples: PositiveInt = 50
    kato_times: PositiveInt = 5
    duality_partition: Literal["reversed", "same"] = "reversed"
    shifts: list[float] = [-1.0, 0.0, 2.5]
    thresholds: Thresholds = Thresholds()


class ModulusConfig(_Model):
    epsilon: Optional[float] = None
    pairs: PositiveInt = 40
    decades: PositiveFloat = 2.5

    @model_validator(mode="after")
    def _positive(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        return self


class RunConfig(_Model):
    problem: ProblemConfig
    subdivision: SubdivisionConfig = SubdivisionConfig()
    tolerances: Tolerances = Tolerances()
    seed: int = 0
    output: str = "out"
    solve: SolveConfig = SolveConfig()
    converge: ConvergeConfig = ConvergeConfig()
    verify: VerifyConfig = VerifyConfig()
    modulus: ModulusConfig = ModulusConfig()

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form, excluding the output directory."""
        data = self.model_dump(mode="json", exclude={"output"})
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()
