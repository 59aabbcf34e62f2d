"""Monte Carlo order streams and the far-rural deviation gate."""

from __future__ import annotations

import bisect
import csv
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import Field, model_validator

from .distributions import Distribution, Lognormal, StrictModel, Uniform, sample_truncated
from .network import Client, Network
from .rng import substream

DEFAULT_MAX_WEIGHT_KG = 65.0
ORDER_CSV_COLUMNS = ("id", "network", "client", "zone", "weight_kg", "basket_value_usd", "week")


class GenerationError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Order:
    id: str
    client_id: str
    network_id: str
    zone: str
    weight_kg: float
    basket_value_usd: float
    week: int = 1


class GenerationParams(StrictModel):
    """How orders are drawn.

    ``weekly_orders`` overrides a network's own ``weekly_orders``.
    ``far_rural_sampling_pct`` biases the zone draw away from the network's
    target; the deviation gate still checks against the target, so this is
    the knob for what-if runs and for exercising the gate.

    ``zone_sampling='stratified'`` fixes the far-rural order count at
    ``round(pct * n)`` and shuffles which orders get it; ``'bernoulli'`` flips
    an independent coin per order.
    """

    weekly_orders: dict[str, int] = Field(default_factory=dict)
    weight: Distribution = Uniform(dist="uniform", low=1.0, high=60.0)
    basket_value: Distribution = Lognormal(dist="lognormal", mean_log=5.0, sigma_log=0.6)
    max_weight_kg: float = Field(default=DEFAULT_MAX_WEIGHT_KG, gt=0)
    deviation_threshold_pct: float = Field(default=10.0, gt=0)
    zone_sampling: Literal["stratified", "bernoulli"] = "stratified"
    far_rural_sampling_pct: dict[str, float] = Field(default_factory=dict)
    weight_bands: tuple[float, ...] = (0.0, 20.0, 40.0, DEFAULT_MAX_WEIGHT_KG)
    week: int = 1

    @model_validator(mode="after")
    def _check(self):
        if any(n < 0 for n in self.weekly_orders.values()):
            raise ValueError("weekly order counts must be >= 0")
        if any(not 0 <= p <= 100 for p in self.far_rural_sampling_pct.values()):
            raise ValueError("far_rural_sampling_pct values must lie in [0, 100]")
        b = self.weight_bands
        if len(b) < 2 or any(hi <= lo for lo, hi in zip(b, b[1:])):
            raise ValueError("weight_bands must be at least two strictly increasing edges")
        if b[0] != 0 or b[-1] < self.max_weight_kg:
            raise ValueError("weight_bands must start at 0 and reach max_weight_kg")
        return self

    def count_for(self, network: Network) -> int:
        return self.weekly_orders.get(network.id, network.weekly_orders)

    def sampling_pct(self, network: Network) -> float:
        return self.far_rural_sampling_pct.get(network.id, network.far_rural_pct)

    def band_labels(self) -> list[str]:
        b = self.weight_bands
        return [f"{_fmt_edge(lo)}-{_fmt_edge(hi)}" for lo, hi in zip(b, b[1:])]

    def weight_band(self, weight_kg: float) -> str:
        # bands are (lo, hi]
        i = bisect.bisect_left(self.weight_bands, weight_kg) - 1
        i = min(max(i, 0), len(self.weight_bands) - 2)
        return self.band_labels()[i]


def _fmt_edge(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else str(x)


def _group_clients(clients: Iterable[Client] | Mapping[str, Sequence[Client]]):
    if isinstance(clients, Mapping):
        return clients
    grouped = defaultdict(list)
    for c in clients:
        grouped[c.network_id].append(c)
    return grouped


def generate_network_orders(
    network: Network,
    clients: Sequence[Client],
    params: GenerationParams,
    seed: int,
    replication: int = 0,
    n_orders: int | None = None,
) -> list[Order]:
    n = params.count_for(network) if n_orders is None else n_orders
    if n == 0:
        return []
    if not clients:
        raise GenerationError(f"network {network.id!r} has {n} orders but no clients")

    rng = substream(seed, "orders", network.id, replication)
    p = params.sampling_pct(network) / 100.0
    if params.zone_sampling == "stratified":
        is_far = np.zeros(n, dtype=bool)
        is_far[: round(p * n)] = True
        is_far = rng.permutation(is_far)
    else:
        is_far = rng.random(n) < p

    far_pool = [c for c in clients if c.zone == "far_rural"]
    near_pool = [c for c in clients if c.zone != "far_rural"]
    n_far = int(is_far.sum())
    if n_far and not far_pool:
        raise GenerationError(f"network {network.id!r} needs far-rural orders but has no far-rural clients")
    if n - n_far and not near_pool:
        raise GenerationError(f"network {network.id!r} needs domestic orders but has only far-rural clients")

    far_pick = rng.integers(0, max(len(far_pool), 1), n)
    near_pick = rng.integers(0, max(len(near_pool), 1), n)
    weights = sample_truncated(params.weight, rng, n, upper=params.max_weight_kg)
    baskets = sample_truncated(params.basket_value, rng, n, upper=np.inf)

    orders = []
    for i in range(n):
        client = far_pool[far_pick[i]] if is_far[i] else near_pool[near_pick[i]]
        orders.append(
            Order(
                id=f"{network.id}-r{replication}-{i:05d}",
                client_id=client.id,
                network_id=network.id,
                zone=client.zone,
                weight_kg=float(weights[i]),
                basket_value_usd=float(baskets[i]),
                week=params.week,
            )
        )
    return orders


def generate_orders(
    networks: Sequence[Network],
    clients: Iterable[Client] | Mapping[str, Sequence[Client]],
    params: GenerationParams,
    seed: int,
    replication: int = 0,
) -> list[Order]:
    """Generate one week of orders for every network.

    Each network draws from its own substream keyed on
    ``(seed, network id, replication)``, so networks can be generated in any
    order or in parallel with identical results.
    """
    grouped = _group_clients(clients)
    out: list[Order] = []
    for net in networks:
        out.extend(generate_network_orders(net, grouped.get(net.id, ()), params, seed, replication))
    return out


@dataclass(frozen=True)
class DeviationReport:
    network_id: str
    n_orders: int
    target_pct: float
    observed_pct: float
    rel_deviation_pct: float
    passed: bool
    reason: str = ""


def relative_deviation_pct(observed_pct: float, target_pct: float) -> float:
    if target_pct == 0:
        return 0.0 if observed_pct == 0 else math.inf
    return 100.0 * abs(observed_pct - target_pct) / target_pct


def check_deviation(
    orders: Iterable[Order], params: GenerationParams, networks: Sequence[Network]
) -> dict[str, DeviationReport]:
    """Compare each network's observed far-rural order share to its target."""
    total: dict[str, int] = defaultdict(int)
    far: dict[str, int] = defaultdict(int)
    for o in orders:
        total[o.network_id] += 1
        far[o.network_id] += o.zone == "far_rural"

    reports = {}
    for net in networks:
        n = total[net.id]
        target = net.far_rural_pct
        if n == 0:
            reports[net.id] = DeviationReport(net.id, 0, target, 0.0, 0.0, True, "no orders")
            continue
        observed = 100.0 * far[net.id] / n
        rel = relative_deviation_pct(observed, target)
        reason = ""
        if math.isinf(rel):
            reason = "undefined target: far_rural_pct is 0 but far-rural orders were generated"
        passed = rel <= params.deviation_threshold_pct
        reports[net.id] = DeviationReport(net.id, n, target, observed, rel, passed, reason)
    return reports


def write_orders_csv(orders: Iterable[Order], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ORDER_CSV_COLUMNS)
        for o in orders:
            w.writerow(
                [o.id, o.network_id, o.client_id, o.zone, f"{o.weight_kg:.6f}",
                 f"{o.basket_value_usd:.2f}", o.week]
            )
