"""Network topology, carriers and synthetic client populations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import Field, model_validator

from .distributions import Distribution, StrictModel, Uniform, sample_truncated
from .rng import substream

Zone = Literal["urban", "rural", "far_rural"]
ZONES: tuple[str, ...] = ("urban", "rural", "far_rural")
NO_HABIT = "none"


class Carrier(StrictModel):
    id: str = Field(min_length=1)
    kind: Literal["worldwide", "vendor_truck", "supplier_truck", "pickup_point"]
    max_weight_kg: float | None = Field(default=None, gt=0)
    base_transit_days: int = Field(ge=0)
    guaranteed: bool

    @model_validator(mode="after")
    def _worldwide_needs_cap(self):
        if self.kind == "worldwide" and self.max_weight_kg is None:
            raise ValueError(f"carrier {self.id!r}: max_weight_kg is required for kind=worldwide")
        return self


class Network(StrictModel):
    id: str = Field(min_length=1)
    role: Literal["supplier", "reseller"]
    supplies: tuple[str, ...] = ()
    urban_clients: int = Field(ge=0)
    rural_clients: int = Field(ge=0)
    weekly_orders: int = Field(ge=0)
    far_rural_pct: float = Field(ge=0, le=100)
    note: str = ""

    @model_validator(mode="after")
    def _check(self):
        if self.id in self.supplies:
            raise ValueError(f"network {self.id!r} supplies itself")
        if self.weekly_orders > 0 and self.urban_clients + self.rural_clients == 0:
            raise ValueError(f"network {self.id!r} has weekly_orders > 0 but no clients")
        return self

    @property
    def n_clients(self) -> int:
        return self.urban_clients + self.rural_clients


class ClientProfile(StrictModel):
    """Distributions that client attributes are drawn from.

    ``habits`` maps carrier id (or ``"none"``) to a categorical weight;
    ``habits_by_network`` replaces it for individual networks.
    """

    far_rural_client_fraction: float = Field(default=0.5, gt=0, le=1)
    habits: dict[str, float] = Field(default_factory=lambda: {NO_HABIT: 1.0})
    habits_by_network: dict[str, dict[str, float]] = Field(default_factory=dict)
    price_limit: Distribution = Uniform(dist="uniform", low=100.0, high=250.0)
    delay_tolerance: dict[int, float] = Field(default_factory=lambda: {0: 1.0})

    @model_validator(mode="after")
    def _check(self):
        for name, weights in [("habits", self.habits), *(
            (f"habits_by_network[{k}]", v) for k, v in self.habits_by_network.items()
        )]:
            _check_weights(name, weights)
        _check_weights("delay_tolerance", self.delay_tolerance)
        if any(d < 0 for d in self.delay_tolerance):
            raise ValueError("delay_tolerance days must be non-negative")
        return self

    def habit_weights(self, network_id: str) -> dict[str, float]:
        return self.habits_by_network.get(network_id, self.habits)


def _check_weights(name: str, weights: dict) -> None:
    if not weights:
        raise ValueError(f"{name}: at least one category is required")
    if any(w < 0 for w in weights.values()):
        raise ValueError(f"{name}: weights must be non-negative")
    if sum(weights.values()) <= 0:
        raise ValueError(f"{name}: weights must sum to a positive value")


@dataclass(frozen=True, slots=True)
class Client:
    id: str
    network_id: str
    zone: str
    habitual_carrier: str | None
    price_limit_usd: float
    delay_tolerance_days: int


def far_rural_client_count(network: Network, profile: ClientProfile) -> int:
    if network.far_rural_pct == 0 or network.rural_clients == 0:
        return 0
    n = round(profile.far_rural_client_fraction * network.rural_clients)
    return min(max(n, 1), network.rural_clients)


def _categorical(rng: np.random.Generator, weights: dict, n: int) -> list:
    keys = list(weights)
    p = np.array([weights[k] for k in keys], dtype=float)
    idx = rng.choice(len(keys), size=n, p=p / p.sum())
    return [keys[i] for i in idx]


def synthesize_clients(network: Network, profile: ClientProfile, seed: int) -> list[Client]:
    """Build the client population of one network.

    Exactly ``urban_clients`` urban clients are created, followed by
    ``rural_clients`` rural ones, a subset of which is flagged ``far_rural``
    (``far_rural_client_fraction`` of them).  Order generation then weights
    zones so that the expected far-rural *order* share matches
    ``far_rural_pct``; the client split itself only has to be non-empty.
    """
    n = network.n_clients
    if n == 0:
        return []
    rng = substream(seed, "clients", network.id)

    zones = ["urban"] * network.urban_clients + ["rural"] * network.rural_clients
    n_far = far_rural_client_count(network, profile)
    if n_far:
        rural_idx = rng.permutation(network.rural_clients)[:n_far] + network.urban_clients
        for i in rural_idx:
            zones[i] = "far_rural"

    habits = _categorical(rng, profile.habit_weights(network.id), n)
    limits = sample_truncated(profile.price_limit, rng, n, upper=np.inf)
    tolerances = _categorical(rng, profile.delay_tolerance, n)

    return [
        Client(
            id=f"{network.id}-C{i:05d}",
            network_id=network.id,
            zone=zones[i],
            habitual_carrier=None if habits[i] == NO_HABIT else habits[i],
            price_limit_usd=float(limits[i]),
            delay_tolerance_days=int(tolerances[i]),
        )
        for i in range(n)
    ]
