"""Rate cards, rate shopping and base-fee calibration."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from pydantic import Field, field_validator, model_validator

from .distributions import StrictModel
from .network import ZONES, Carrier
from .orders import Order

CALIBRATION_TOLERANCE = 0.005


class CalibrationError(ValueError):
    pass


class RateCard(StrictModel):
    """Pricing rule for one carrier.

    Linear mode: ``(base_fee + per_kg * weight) * zone_multiplier[zone]``,
    then the drop-ship discount for supplier trucks.  Flat mode (pickup
    points): ``flat_fee + overdue_fee`` regardless of weight or zone.
    """

    carrier_id: str
    base_fee_usd: float = Field(default=0.0, ge=0)
    per_kg_usd: float = Field(default=0.0, ge=0)
    zone_multiplier: dict[str, float] = Field(default_factory=dict)
    max_weight_kg: float | None = Field(default=None, gt=0)
    dropship_discount_pct: float | None = Field(default=None, ge=0, lt=100)
    flat_fee_usd: float | None = Field(default=None, ge=0)
    overdue_fee_usd: float = Field(default=0.0, ge=0)

    @field_validator("zone_multiplier")
    @classmethod
    def _full_zone_map(cls, v: dict[str, float]) -> dict[str, float]:
        unknown = set(v) - set(ZONES)
        if unknown:
            raise ValueError(f"unknown zone(s) in zone_multiplier: {sorted(unknown)}")
        if any(m <= 0 for m in v.values()):
            raise ValueError("zone multipliers must be positive")
        return {z: float(v.get(z, 1.0)) for z in ZONES}

    @model_validator(mode="after")
    def _one_mode(self):
        if self.is_flat:
            if self.base_fee_usd or self.per_kg_usd:
                raise ValueError(
                    f"rate card {self.carrier_id!r}: flat_fee_usd excludes base_fee_usd/per_kg_usd"
                )
            if self.flat_fee_usd + self.overdue_fee_usd <= 0:
                raise ValueError(f"rate card {self.carrier_id!r}: flat price must be positive")
        else:
            if self.overdue_fee_usd:
                raise ValueError(
                    f"rate card {self.carrier_id!r}: overdue_fee_usd only applies to flat pricing"
                )
            if self.base_fee_usd == 0 and self.per_kg_usd == 0:
                raise ValueError(f"rate card {self.carrier_id!r}: linear price is identically zero")
        return self

    @property
    def is_flat(self) -> bool:
        return self.flat_fee_usd is not None

    @property
    def discount_factor(self) -> float:
        return 1.0 - (self.dropship_discount_pct or 0.0) / 100.0

    def multiplier(self, zone: str) -> float:
        return self.zone_multiplier.get(zone, 1.0)


@dataclass(frozen=True, slots=True)
class Quote:
    carrier_id: str
    price_usd: float
    transit_days: int
    guaranteed: bool


def weight_cap(carrier: Carrier, card: RateCard) -> float | None:
    caps = [c for c in (carrier.max_weight_kg, card.max_weight_kg) if c is not None]
    return min(caps) if caps else None


def list_price(card: RateCard, zone: str, weight_kg: float) -> float:
    """Price before the drop-ship discount."""
    if card.is_flat:
        return card.flat_fee_usd + card.overdue_fee_usd
    return (card.base_fee_usd + card.per_kg_usd * weight_kg) * card.multiplier(zone)


def quote_price(card: RateCard, zone: str, weight_kg: float) -> float:
    price = list_price(card, zone, weight_kg)
    if card.dropship_discount_pct is not None:
        price = price * card.discount_factor
    return price


def rate_shop(
    order: Order,
    carriers: Mapping[str, Carrier],
    rate_cards: Mapping[str, RateCard],
    availability: Iterable[str],
    delay_additions: Mapping[str, int] | None = None,
) -> list[Quote]:
    """Quote ``order`` with every available carrier whose weight cap admits it.

    Quotes come back sorted by price, then carrier id.  An empty list is a
    legitimate answer.
    """
    delay_additions = delay_additions or {}
    quotes = []
    for cid in availability:
        carrier = carriers[cid]
        try:
            card = rate_cards[cid]
        except KeyError:
            raise ValueError(f"no rate card for available carrier {cid!r}") from None
        cap = weight_cap(carrier, card)
        if cap is not None and order.weight_kg > cap:
            continue
        quotes.append(
            Quote(
                carrier_id=cid,
                price_usd=quote_price(card, order.zone, order.weight_kg),
                transit_days=carrier.base_transit_days + delay_additions.get(cid, 0),
                guaranteed=carrier.guaranteed,
            )
        )
    quotes.sort(key=lambda q: (q.price_usd, q.carrier_id))
    return quotes


@dataclass(frozen=True)
class CalibrationRow:
    carrier: str
    target: float
    achieved: float
    base_fee: float
    pre_discount_mean: float
    n_quoted: int


def calibrate(
    rate_cards: Mapping[str, RateCard],
    targets: Mapping[str, float],
    order_sample: Sequence[Order],
    carriers: Mapping[str, Carrier],
) -> tuple[dict[str, RateCard], list[CalibrationRow]]:
    """Solve each targeted card's fixed fee so its mean quote equals the target.

    Only the base fee (flat fee for pickup cards) moves; per-kg rates, zone
    multipliers and discounts stay fixed.  The mean is taken over the sample
    orders the carrier actually quotes (weight cap respected).  Because the
    mean quote is affine in the base fee the solve is closed-form; the
    achieved mean is then re-measured by quoting the sample again.
    """
    if not order_sample:
        raise CalibrationError("calibration sample is empty")
    cards = dict(rate_cards)
    report = []
    for cid in sorted(targets):
        target = float(targets[cid])
        if target <= 0:
            raise CalibrationError(f"target for {cid!r} must be positive, got {target}")
        if cid not in cards:
            raise CalibrationError(f"no rate card for calibration target {cid!r}")
        card = cards[cid]
        cap = weight_cap(carriers[cid], card)
        sample = [o for o in order_sample if cap is None or o.weight_kg <= cap]
        if not sample:
            raise CalibrationError(f"carrier {cid!r} quotes none of the calibration sample")

        if card.is_flat:
            fee = target - card.overdue_fee_usd
            if fee < 0:
                raise CalibrationError(
                    f"carrier {cid!r}: target {target} is below the overdue fee {card.overdue_fee_usd}"
                )
            new = card.model_copy(update={"flat_fee_usd": fee})
        else:
            mult = np.array([card.multiplier(o.zone) for o in sample])
            weights = np.array([o.weight_kg for o in sample])
            pre_discount_target = target / card.discount_factor
            per_kg_part = card.per_kg_usd * float(np.mean(weights * mult))
            fee = (pre_discount_target - per_kg_part) / float(np.mean(mult))
            if fee < 0:
                raise CalibrationError(
                    f"carrier {cid!r}: target {target} is below the per-kg component "
                    f"mean {per_kg_part * card.discount_factor:.4f}; base fee would be negative"
                )
            new = card.model_copy(update={"base_fee_usd": fee})

        quoted = np.array([quote_price(new, o.zone, o.weight_kg) for o in sample])
        pre = np.array([list_price(new, o.zone, o.weight_kg) for o in sample])
        achieved = float(quoted.mean())
        if abs(achieved - target) > CALIBRATION_TOLERANCE * target:
            raise CalibrationError(f"carrier {cid!r}: achieved {achieved:.4f} vs target {target}")
        cards[cid] = new
        report.append(
            CalibrationRow(
                carrier=cid,
                target=target,
                achieved=achieved,
                base_fee=fee,
                pre_discount_mean=float(pre.mean()),
                n_quoted=len(sample),
            )
        )
    return cards, report
