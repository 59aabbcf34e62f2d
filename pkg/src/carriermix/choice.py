"""Per-order carrier choice with abandonment.

The decision is a lexicographic cascade: feasibility (price limit and delay
tolerance), then habit, then the cheapest feasible quote.  ``choose`` draws
exactly two uniforms from the stream on every call, whatever branch it
takes, so a shared per-network stream stays aligned across scenarios that
offer different carriers (common random numbers).
"""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

from pydantic import Field

from .distributions import StrictModel
from .network import Client
from .orders import Order
from .tariff import Quote

DROP_REASONS = ("over_price_limit", "habitual_absent", "no_quotes", "delay_exceeded")


class ChoicePolicy(StrictModel):
    habit_stickiness: float = Field(default=1.0, ge=0, le=1)
    guaranteed_preference: bool = True
    price_tolerance: float = Field(default=1.0, gt=0)
    abandon_if_habit_missing_prob: float = Field(default=0.0, ge=0, le=1)


class UniformStream(Protocol):
    def random(self) -> float: ...


@dataclass(frozen=True, slots=True)
class ChoiceOutcome:
    order_id: str
    carrier_id: str | None = None
    price_usd: float | None = None
    transit_days: int | None = None
    dropped_reason: str | None = None

    @property
    def selected(self) -> bool:
        return self.dropped_reason is None

    @classmethod
    def pick(cls, order_id: str, q: Quote) -> ChoiceOutcome:
        return cls(order_id, q.carrier_id, q.price_usd, q.transit_days)

    @classmethod
    def drop(cls, order_id: str, reason: str) -> ChoiceOutcome:
        assert reason in DROP_REASONS, reason
        return cls(order_id, dropped_reason=reason)


def preference_key(q: Quote, guaranteed_preference: bool) -> tuple:
    return (
        q.price_usd,
        (not q.guaranteed) if guaranteed_preference else False,
        q.transit_days,
        q.carrier_id,
    )


def choose(
    order: Order,
    quotes: Sequence[Quote],
    client: Client,
    policy: ChoicePolicy,
    rng_stream: UniformStream,
    available: frozenset[str] | set[str] | None = None,
) -> ChoiceOutcome:
    """Decide which quote the client accepts, or why the order is dropped.

    ``available`` is the scenario's carrier set; a habitual carrier missing
    from it (as opposed to merely capped out or infeasible) triggers the
    abandonment draw.  When omitted, the carriers present in ``quotes`` are
    taken as the available set.
    """
    u_habit = rng_stream.random()
    u_abandon = rng_stream.random()

    if not quotes:
        return ChoiceOutcome.drop(order.id, "no_quotes")

    limit = client.price_limit_usd * policy.price_tolerance
    max_transit = min(q.transit_days for q in quotes) + client.delay_tolerance_days
    feasible = [q for q in quotes if q.price_usd <= limit and q.transit_days <= max_transit]
    if not feasible:
        if min(q.price_usd for q in quotes) > limit:
            return ChoiceOutcome.drop(order.id, "over_price_limit")
        return ChoiceOutcome.drop(order.id, "delay_exceeded")

    habit = client.habitual_carrier
    if habit is not None:
        offered = available if available is not None else {q.carrier_id for q in quotes}
        for q in feasible:
            if q.carrier_id == habit:
                if u_habit < policy.habit_stickiness:
                    return ChoiceOutcome.pick(order.id, q)
                break
        else:
            if habit not in offered and u_abandon < policy.abandon_if_habit_missing_prob:
                return ChoiceOutcome.drop(order.id, "habitual_absent")

    best = min(feasible, key=lambda q: preference_key(q, policy.guaranteed_preference))
    return ChoiceOutcome.pick(order.id, best)


# preference profile import: client_id, habitual_carrier, price_limit_usd, delay_tolerance_days
PREFERENCE_COLUMNS = ("client_id", "habitual_carrier", "price_limit_usd", "delay_tolerance_days")


@dataclass(frozen=True)
class Preference:
    client_id: str
    habitual_carrier: str | None
    price_limit_usd: float
    delay_tolerance_days: int


def read_preferences(path: str | Path) -> dict[str, Preference]:
    prefs = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != PREFERENCE_COLUMNS:
            raise ValueError(
                f"{path}: expected columns {','.join(PREFERENCE_COLUMNS)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                limit = float(row["price_limit_usd"]) if row["price_limit_usd"] else math.inf
                tol = int(row["delay_tolerance_days"])
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from None
            if limit <= 0 or tol < 0:
                raise ValueError(f"{path}:{lineno}: price limit must be > 0 and tolerance >= 0")
            cid = row["client_id"]
            if cid in prefs:
                raise ValueError(f"{path}:{lineno}: duplicate client_id {cid!r}")
            prefs[cid] = Preference(cid, row["habitual_carrier"] or None, limit, tol)
    return prefs


def apply_preferences(clients: Sequence[Client], prefs: Mapping[str, Preference]) -> list[Client]:
    """Overwrite synthesized client attributes with imported profiles."""
    out = []
    for c in clients:
        p = prefs.get(c.id)
        if p is None:
            out.append(c)
        else:
            out.append(
                replace(
                    c,
                    habitual_carrier=p.habitual_carrier,
                    price_limit_usd=p.price_limit_usd,
                    delay_tolerance_days=p.delay_tolerance_days,
                )
            )
    return out
