"""Configuration file loading and cross-reference validation.

The file is YAML (JSON also parses).  Every mapping is strict: unknown keys
are errors.  Top-level layout::

    master_seed: 2021
    networks:    [ {id, role, supplies, urban_clients, rural_clients,
                    weekly_orders, far_rural_pct, note?}, ... ]
    carriers:    [ {id, kind, max_weight_kg?, base_transit_days, guaranteed}, ... ]
    rate_cards:  [ {carrier_id, base_fee_usd, per_kg_usd, zone_multiplier,
                    max_weight_kg?, dropship_discount_pct?, flat_fee_usd?,
                    overdue_fee_usd}, ... ]
    clients:     {far_rural_client_fraction, habits, habits_by_network,
                  price_limit, delay_tolerance}
    generation:  {weekly_orders, weight, basket_value, max_weight_kg,
                  deviation_threshold_pct, zone_sampling,
                  far_rural_sampling_pct, weight_bands, week}
    choice:      {habit_stickiness, guaranteed_preference, price_tolerance,
                  abandon_if_habit_missing_prob}
    calibration: {targets, zone, sample_size, seed}
    scenarios:   [ {id, label, available_carriers, price_overrides,
                    delay_additions, order_totals, replications, master_seed?}, ... ]

See ``data/default.yaml`` for a complete example.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Literal

import yaml
from pydantic import Field, ValidationError, model_validator

from .choice import ChoicePolicy
from .distributions import StrictModel
from .network import NO_HABIT, Carrier, ClientProfile, Network
from .orders import GenerationParams
from .scenarios import Scenario
from .tariff import RateCard

DEFAULT_CONFIG = Path(__file__).parent / "data" / "default.yaml"


class ConfigError(ValueError):
    pass


class CalibrationSpec(StrictModel):
    targets: dict[str, float] = Field(default_factory=dict)
    zone: Literal["urban", "rural", "far_rural"] = "far_rural"
    sample_size: int = Field(default=5000, gt=0)
    seed: int = Field(default=0, ge=0)


def _dupes(ids) -> list[str]:
    return sorted(k for k, n in Counter(ids).items() if n > 1)


class SimulationConfig(StrictModel):
    master_seed: int = Field(default=0, ge=0)
    networks: tuple[Network, ...]
    carriers: tuple[Carrier, ...]
    rate_cards: tuple[RateCard, ...]
    clients: ClientProfile = ClientProfile()
    generation: GenerationParams = GenerationParams()
    choice: ChoicePolicy = ChoicePolicy()
    calibration: CalibrationSpec = CalibrationSpec()
    scenarios: tuple[Scenario, ...] = ()

    @model_validator(mode="after")
    def _cross_refs(self):
        net_ids = [n.id for n in self.networks]
        car_ids = [c.id for c in self.carriers]
        for what, ids in (("network", net_ids), ("carrier", car_ids),
                          ("rate card", [r.carrier_id for r in self.rate_cards]),
                          ("scenario", [s.id for s in self.scenarios])):
            if d := _dupes(ids):
                raise ValueError(f"duplicate {what} id(s): {d}")
        nets, cars = set(net_ids), set(car_ids)

        for n in self.networks:
            missing = [t for t in n.supplies if t not in nets]
            if missing:
                raise ValueError(f"network {n.id!r} supplies unknown network(s) {missing}")

        kinds = {c.id: c.kind for c in self.carriers}
        for card in self.rate_cards:
            if card.carrier_id not in cars:
                raise ValueError(f"rate card for unknown carrier {card.carrier_id!r}")
            kind = kinds[card.carrier_id]
            if card.dropship_discount_pct is not None and kind != "supplier_truck":
                raise ValueError(
                    f"rate card {card.carrier_id!r}: dropship_discount_pct requires kind=supplier_truck"
                )
            if card.is_flat != (kind == "pickup_point"):
                raise ValueError(
                    f"rate card {card.carrier_id!r}: flat pricing is used by, and only by, pickup_point carriers"
                )
        if missing := sorted(cars - {r.carrier_id for r in self.rate_cards}):
            raise ValueError(f"carrier(s) without a rate card: {missing}")

        habit_keys = cars | {NO_HABIT}
        for name, weights in [("clients.habits", self.clients.habits), *(
            (f"clients.habits_by_network[{k}]", v) for k, v in self.clients.habits_by_network.items()
        )]:
            if bad := sorted(set(weights) - habit_keys):
                raise ValueError(f"{name}: unknown carrier(s) {bad}")
        for name, keys in (
            ("clients.habits_by_network", self.clients.habits_by_network),
            ("generation.weekly_orders", self.generation.weekly_orders),
            ("generation.far_rural_sampling_pct", self.generation.far_rural_sampling_pct),
        ):
            if bad := sorted(set(keys) - nets):
                raise ValueError(f"{name}: unknown network(s) {bad}")
        if bad := sorted(set(self.calibration.targets) - cars):
            raise ValueError(f"calibration.targets: unknown carrier(s) {bad}")

        for s in self.scenarios:
            if bad := sorted(set(s.available_carriers) - cars):
                raise ValueError(f"scenario {s.id!r}: unknown carrier(s) {bad}")
            for name, keys in (("price_overrides", s.price_overrides),
                               ("delay_additions", s.delay_additions)):
                if bad := sorted(set(keys) - set(s.available_carriers)):
                    raise ValueError(f"scenario {s.id!r}: {name} for unavailable carrier(s) {bad}")
            if bad := sorted(set(s.order_totals) - nets):
                raise ValueError(f"scenario {s.id!r}: order_totals for unknown network(s) {bad}")
        return self

    @property
    def carrier_map(self) -> dict[str, Carrier]:
        return {c.id: c for c in self.carriers}

    @property
    def rate_card_map(self) -> dict[str, RateCard]:
        return {r.carrier_id: r for r in self.rate_cards}

    @property
    def network_map(self) -> dict[str, Network]:
        return {n.id: n for n in self.networks}

    def scenario(self, scenario_id: str) -> Scenario:
        for s in self.scenarios:
            if s.id == scenario_id:
                return s
        raise KeyError(scenario_id)


def _first_error(e: ValidationError) -> str:
    err = e.errors()[0]
    loc = ".".join(str(p) for p in err["loc"])
    msg = err["msg"].removeprefix("Value error, ")
    return f"{loc}: {msg}" if loc else msg


def parse_config(data: dict) -> SimulationConfig:
    try:
        return SimulationConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_first_error(e)) from None


def load_config(path: str | Path) -> SimulationConfig:
    """Read and validate a configuration file.

    Raises ``ConfigError`` for unreadable or malformed files and for the
    first violated invariant.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror or e}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: parse error: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data)
