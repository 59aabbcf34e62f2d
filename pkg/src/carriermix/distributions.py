"""Sampling distributions named in the configuration file."""

from __future__ import annotations

import math
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Uniform(StrictModel):
    dist: Literal["uniform"]
    low: float
    high: float

    @model_validator(mode="after")
    def _check(self):
        if not self.high > self.low:
            raise ValueError(f"uniform requires high > low (got low={self.low}, high={self.high})")
        return self

    @property
    def mean(self) -> float:
        return (self.low + self.high) / 2

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, n)


class Triangular(StrictModel):
    dist: Literal["triangular"]
    low: float
    mode: float
    high: float

    @model_validator(mode="after")
    def _check(self):
        if not (self.low <= self.mode <= self.high and self.low < self.high):
            raise ValueError("triangular requires low <= mode <= high and low < high")
        return self

    @property
    def mean(self) -> float:
        return (self.low + self.mode + self.high) / 3

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.triangular(self.low, self.mode, self.high, n)


class Normal(StrictModel):
    dist: Literal["normal"]
    mean_: float = Field(alias="mean")
    sd: float = Field(gt=0)

    @property
    def mean(self) -> float:
        return self.mean_

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean_, self.sd, n)


class Lognormal(StrictModel):
    dist: Literal["lognormal"]
    mean_log: float
    sigma_log: float = Field(gt=0)

    @property
    def mean(self) -> float:
        return math.exp(self.mean_log + self.sigma_log**2 / 2)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.lognormal(self.mean_log, self.sigma_log, n)


class Constant(StrictModel):
    dist: Literal["constant"]
    value: float

    @property
    def mean(self) -> float:
        return self.value

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.full(n, self.value, dtype=float)


Distribution = Annotated[
    Union[Uniform, Triangular, Normal, Lognormal, Constant],
    Field(discriminator="dist"),
]

_MAX_REJECTION_ROUNDS = 1000


def sample_truncated(
    dist, rng: np.random.Generator, n: int, upper: float, lower: float = 0.0
) -> np.ndarray:
    """Draw ``n`` values from ``dist`` restricted to ``(lower, upper]``.

    Out-of-range draws are resampled, so the result follows the truncated
    distribution exactly.  Raises ``ValueError`` if the interval holds
    (practically) no mass.
    """
    out = dist.sample(rng, n)
    bad = (out <= lower) | (out > upper)
    rounds = 0
    while bad.any():
        rounds += 1
        if rounds > _MAX_REJECTION_ROUNDS:
            raise ValueError(f"distribution {dist.dist!r} has no mass in ({lower}, {upper}]")
        out[bad] = dist.sample(rng, int(bad.sum()))
        bad = (out <= lower) | (out > upper)
    return out
