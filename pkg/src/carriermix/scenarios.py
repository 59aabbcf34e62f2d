"""Scenario execution: replications, tallies and replication deviation."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from pydantic import Field, model_validator

from .choice import DROP_REASONS, Preference, apply_preferences, choose
from .distributions import StrictModel, sample_truncated
from .network import Client, synthesize_clients
from .orders import DeviationReport, Order, check_deviation, generate_network_orders
from .rng import substream
from .tariff import CalibrationRow, RateCard, calibrate, rate_shop

if TYPE_CHECKING:
    from .config import SimulationConfig

DROPPED = "DROPPED"


class Scenario(StrictModel):
    id: str = Field(min_length=1)
    label: str = ""
    available_carriers: tuple[str, ...]
    price_overrides: dict[str, float] = Field(default_factory=dict)
    delay_additions: dict[str, int] = Field(default_factory=dict)
    order_totals: dict[str, int] = Field(default_factory=dict)
    replications: int = Field(default=2, ge=2)
    master_seed: int | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if not self.available_carriers:
            raise ValueError(f"scenario {self.id!r}: available_carriers must be non-empty")
        if len(set(self.available_carriers)) != len(self.available_carriers):
            raise ValueError(f"scenario {self.id!r}: duplicate available carriers")
        if any(v <= 0 for v in self.price_overrides.values()):
            raise ValueError(f"scenario {self.id!r}: price overrides must be positive")
        if any(v < 0 for v in self.delay_additions.values()):
            raise ValueError(f"scenario {self.id!r}: delay additions must be >= 0")
        if any(v < 0 for v in self.order_totals.values()):
            raise ValueError(f"scenario {self.id!r}: order totals must be >= 0")
        return self


def deviation_pct(counts: Sequence[float]) -> float:
    """Spread of replicated counts: ``100 * (max - min) / mean``; 0 when the mean is 0."""
    if len(counts) < 2:
        raise ValueError("deviation needs at least two replications")
    mean = sum(counts) / len(counts)
    if mean == 0:
        return 0.0
    return 100.0 * (max(counts) - min(counts)) / mean


def zone_class(zone: str) -> str:
    return "far_rural" if zone == "far_rural" else "domestic"


# -- calibration -----------------------------------------------------------


def calibration_sample(config: SimulationConfig) -> list[Order]:
    spec = config.calibration
    gen = config.generation
    rng = substream(spec.seed, "calibration", spec.zone)
    weights = sample_truncated(gen.weight, rng, spec.sample_size, upper=gen.max_weight_kg)
    baskets = sample_truncated(gen.basket_value, rng, spec.sample_size, upper=np.inf)
    return [
        Order(f"cal-{i:05d}", "", "", spec.zone, float(w), float(b), gen.week)
        for i, (w, b) in enumerate(zip(weights, baskets))
    ]


def calibrated_cards(
    config: SimulationConfig,
    overrides: Mapping[str, float] | None = None,
    sample: Sequence[Order] | None = None,
) -> tuple[dict[str, RateCard], list[CalibrationRow]]:
    """Calibrate all configured targets, then re-calibrate any overrides."""
    sample = calibration_sample(config) if sample is None else sample
    carriers = config.carrier_map
    targets = dict(config.calibration.targets)
    targets.update(overrides or {})
    return calibrate(config.rate_card_map, targets, sample, carriers)


# -- results ---------------------------------------------------------------


@dataclass
class ReplicationTally:
    generated: dict[str, int]
    selected: dict[tuple[str, str], int]
    dropped: dict[tuple[str, str], int]
    detail: dict[tuple[str, str, str, str], int]
    quoted_sum: dict[str, float]
    quoted_n: dict[str, int]
    selected_sum: dict[str, float]
    deviation: dict[str, DeviationReport]


@dataclass
class ScenarioResult:
    scenario_id: str
    label: str
    seed: int
    replications: int
    networks: list[str]
    carriers: list[str]
    tallies: list[ReplicationTally]
    calibration: list[CalibrationRow] = field(default_factory=list)

    def selected_counts(self, network: str, carrier: str) -> list[int]:
        return [t.selected.get((network, carrier), 0) for t in self.tallies]

    def dropped_counts(self, network: str, reason: str | None = None) -> list[int]:
        reasons = DROP_REASONS if reason is None else (reason,)
        return [sum(t.dropped.get((network, r), 0) for r in reasons) for t in self.tallies]

    def generated_counts(self, network: str) -> list[int]:
        return [t.generated.get(network, 0) for t in self.tallies]

    def mean_selected(self, network: str, carrier: str) -> float:
        return float(np.mean(self.selected_counts(network, carrier)))

    def mean_dropped(self, network: str, reason: str | None = None) -> float:
        return float(np.mean(self.dropped_counts(network, reason)))

    def cell_deviation_pct(self, network: str, carrier: str) -> float:
        return deviation_pct(self.selected_counts(network, carrier))

    def carrier_deviation_pct(self, carrier: str) -> float:
        """Deviation of the carrier's all-network total across replications."""
        totals = [sum(t.selected.get((n, carrier), 0) for n in self.networks) for t in self.tallies]
        return deviation_pct(totals)

    def total_dropped(self) -> float:
        return sum(self.mean_dropped(n) for n in self.networks)

    def avg_quoted_price(self, carrier: str) -> float | None:
        n = sum(t.quoted_n.get(carrier, 0) for t in self.tallies)
        if n == 0:
            return None
        return sum(t.quoted_sum.get(carrier, 0.0) for t in self.tallies) / n

    def avg_selected_price(self, carrier: str) -> float | None:
        n = sum(t.selected.get((net, carrier), 0) for t in self.tallies for net in self.networks)
        if n == 0:
            return None
        return sum(t.selected_sum.get(carrier, 0.0) for t in self.tallies) / n

    def calibrated_price(self, carrier: str) -> float | None:
        for row in self.calibration:
            if row.carrier == carrier:
                return row.achieved
        return None

    @property
    def deviation_flag(self) -> bool:
        return any(not r.passed for t in self.tallies for r in t.deviation.values())

    def failed_deviation_checks(self) -> list[tuple[int, DeviationReport]]:
        return [(i, r) for i, t in enumerate(self.tallies) for r in t.deviation.values() if not r.passed]

    def conservation_violations(self) -> list[tuple[int, str, int, int]]:
        """(replication, network, selected + dropped, generated) where they differ."""
        bad = []
        for i, t in enumerate(self.tallies):
            for n in self.networks:
                sel = sum(t.selected.get((n, c), 0) for c in self.carriers)
                drop = sum(t.dropped.get((n, r), 0) for r in DROP_REASONS)
                if sel + drop != t.generated.get(n, 0):
                    bad.append((i, n, sel + drop, t.generated.get(n, 0)))
        return bad

    def mean_detail(self) -> dict[tuple[str, str, str, str], float]:
        """Mean selections keyed by (network, zone_class, carrier, weight_band)."""
        keys = sorted({k for t in self.tallies for k in t.detail})
        return {k: float(np.mean([t.detail.get(k, 0) for t in self.tallies])) for k in keys}


@dataclass(frozen=True)
class ScenarioFailure:
    scenario_id: str
    error: str


# -- execution -------------------------------------------------------------


@dataclass(frozen=True)
class _Prepared:
    scenario: Scenario
    seed: int
    cards: dict[str, RateCard]
    calibration: list[CalibrationRow]
    clients: dict[str, list[Client]]


def _prepare(
    scenario: Scenario,
    config: SimulationConfig,
    seed: int | None,
    preferences: Mapping[str, Preference] | None,
    sample: Sequence[Order] | None,
) -> _Prepared:
    seed = seed if seed is not None else (
        scenario.master_seed if scenario.master_seed is not None else config.master_seed
    )
    cards, report = calibrated_cards(config, scenario.price_overrides, sample)
    clients = {}
    for net in config.networks:
        pop = synthesize_clients(net, config.clients, seed)
        clients[net.id] = apply_preferences(pop, preferences) if preferences else pop
    return _Prepared(scenario, seed, cards, report, clients)


def _run_replication(prep: _Prepared, config: SimulationConfig, rep: int, stream_id: int) -> ReplicationTally:
    scenario = prep.scenario
    carriers = config.carrier_map
    available = frozenset(scenario.available_carriers)
    gen = config.generation
    policy = config.choice

    generated: dict[str, int] = {}
    selected: dict[tuple[str, str], int] = defaultdict(int)
    dropped: dict[tuple[str, str], int] = defaultdict(int)
    detail: dict[tuple[str, str, str, str], int] = defaultdict(int)
    quoted_sum: dict[str, float] = defaultdict(float)
    quoted_n: dict[str, int] = defaultdict(int)
    selected_sum: dict[str, float] = defaultdict(float)
    all_orders: list[Order] = []

    for net in config.networks:
        n = scenario.order_totals.get(net.id, gen.count_for(net))
        orders = generate_network_orders(net, prep.clients[net.id], gen, prep.seed, stream_id, n_orders=n)
        all_orders.extend(orders)
        generated[net.id] = len(orders)
        clients = {c.id: c for c in prep.clients[net.id]}
        stream = substream(prep.seed, "choice", net.id, stream_id)
        for order in orders:
            quotes = rate_shop(order, carriers, prep.cards, scenario.available_carriers,
                               scenario.delay_additions)
            for q in quotes:
                quoted_sum[q.carrier_id] += q.price_usd
                quoted_n[q.carrier_id] += 1
            outcome = choose(order, quotes, clients[order.client_id], policy, stream, available)
            if outcome.selected:
                selected[(net.id, outcome.carrier_id)] += 1
                selected_sum[outcome.carrier_id] += outcome.price_usd
                band = gen.weight_band(order.weight_kg)
                detail[(net.id, zone_class(order.zone), outcome.carrier_id, band)] += 1
            else:
                dropped[(net.id, outcome.dropped_reason)] += 1

    return ReplicationTally(
        generated=generated,
        selected=dict(selected),
        dropped=dict(dropped),
        detail=dict(detail),
        quoted_sum=dict(quoted_sum),
        quoted_n=dict(quoted_n),
        selected_sum=dict(selected_sum),
        deviation=check_deviation(all_orders, gen, config.networks),
    )


def _assemble(prep: _Prepared, config: SimulationConfig, tallies: list[ReplicationTally]) -> ScenarioResult:
    s = prep.scenario
    return ScenarioResult(
        scenario_id=s.id,
        label=s.label,
        seed=prep.seed,
        replications=s.replications,
        networks=[n.id for n in config.networks],
        carriers=list(s.available_carriers),
        tallies=tallies,
        calibration=prep.calibration,
    )


def run_scenario(
    scenario: Scenario,
    config: SimulationConfig,
    seed: int | None = None,
    preferences: Mapping[str, Preference] | None = None,
    substream_ids: Sequence[int] | None = None,
) -> ScenarioResult:
    """Run every replication of ``scenario`` and tally the outcomes.

    Replication ``r`` draws orders and choices from substreams labelled
    ``r`` (or ``substream_ids[r]``).  Orders and choice draws do not depend
    on the scenario id, so two scenarios run on the same seed see the same
    orders and clients and differ only in what is offered.
    """
    ids = list(range(scenario.replications)) if substream_ids is None else list(substream_ids)
    if len(ids) != scenario.replications:
        raise ValueError("substream_ids must have one entry per replication")
    prep = _prepare(scenario, config, seed, preferences, None)
    tallies = [_run_replication(prep, config, r, sid) for r, sid in enumerate(ids)]
    return _assemble(prep, config, tallies)


def scenario_orders(
    scenario: Scenario, config: SimulationConfig, replication: int, seed: int | None = None
) -> list[Order]:
    """Regenerate the orders one replication of ``scenario`` ran on."""
    seed = seed if seed is not None else (
        scenario.master_seed if scenario.master_seed is not None else config.master_seed
    )
    gen = config.generation
    out: list[Order] = []
    for net in config.networks:
        clients = synthesize_clients(net, config.clients, seed)
        n = scenario.order_totals.get(net.id, gen.count_for(net))
        out.extend(generate_network_orders(net, clients, gen, seed, replication, n_orders=n))
    return out


def run_suite(
    scenarios: Sequence[Scenario],
    config: SimulationConfig,
    seed: int | None = None,
    workers: int = 1,
    preferences: Mapping[str, Preference] | None = None,
) -> list[ScenarioResult | ScenarioFailure]:
    """Run scenarios with their replications spread over ``workers`` threads.

    Output order matches input order.  A scenario that fails to prepare or
    run becomes a ``ScenarioFailure``; the rest still run.
    """
    if not scenarios:
        return []
    sample = calibration_sample(config)
    preps: list[_Prepared | ScenarioFailure] = []
    for s in scenarios:
        try:
            preps.append(_prepare(s, config, seed, preferences, sample))
        except ValueError as e:
            preps.append(ScenarioFailure(s.id, str(e)))

    jobs = [(i, r) for i, p in enumerate(preps) if isinstance(p, _Prepared)
            for r in range(p.scenario.replications)]

    def work(job):
        i, r = job
        try:
            return _run_replication(preps[i], config, r, r)
        except ValueError as e:
            return ScenarioFailure(preps[i].scenario.id, str(e))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(work, jobs))
    else:
        outputs = [work(j) for j in jobs]

    per_scenario: dict[int, list] = defaultdict(list)
    for (i, _), out in zip(jobs, outputs):
        per_scenario[i].append(out)

    results: list[ScenarioResult | ScenarioFailure] = []
    for i, prep in enumerate(preps):
        if isinstance(prep, ScenarioFailure):
            results.append(prep)
            continue
        outs = per_scenario[i]
        failure = next((o for o in outs if isinstance(o, ScenarioFailure)), None)
        results.append(failure or _assemble(prep, config, outs))
    return results
