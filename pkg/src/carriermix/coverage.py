"""Coverage of reference (completed) orders by simulated selections.

For one zone class, the coverage of a (carrier, network) cell is::

    100 * sum_b min(simulated_b, reference_b) / sum_b reference_b

over weight bands ``b``, i.e. the per-band capped overlap weighted by the
reference counts.  A reference band labelled ``all`` is compared with the
simulated count summed over every band.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

from .scenarios import ScenarioResult

ZONE_CLASSES = ("far_rural", "domestic")
ALL_BANDS = "all"
COUNT_COLUMNS = ("network", "zone_class", "carrier", "weight_band", "count")


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceOrder:
    network_id: str
    zone_class: str
    carrier_id: str
    weight_band: str
    count: float

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.network_id, self.zone_class, self.carrier_id, self.weight_band)


def validate_rows(rows: Iterable[ReferenceOrder]) -> list[ReferenceOrder]:
    rows = list(rows)
    seen = set()
    for r in rows:
        if r.zone_class not in ZONE_CLASSES:
            raise CoverageError(f"unknown zone_class {r.zone_class!r}")
        if r.count < 0:
            raise CoverageError(f"negative count for {r.key}")
        if r.key in seen:
            raise CoverageError(f"duplicate row {r.key}")
        seen.add(r.key)
    return rows


def read_counts_csv(path: str | Path) -> list[ReferenceOrder]:
    """Read a (network, zone_class, carrier, weight_band, count) CSV."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COUNT_COLUMNS:
            raise CoverageError(f"{path}: expected columns {','.join(COUNT_COLUMNS)}, got {reader.fieldnames}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                count = float(row["count"])
            except ValueError:
                raise CoverageError(f"{path}:{lineno}: bad count {row['count']!r}") from None
            rows.append(ReferenceOrder(row["network"], row["zone_class"], row["carrier"],
                                       row["weight_band"], count))
    return validate_rows(rows)


def write_counts_csv(rows: Iterable[ReferenceOrder], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COUNT_COLUMNS)
        for r in rows:
            w.writerow([r.network_id, r.zone_class, r.carrier_id, r.weight_band, _fmt_count(r.count)])


def _fmt_count(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:.6g}"


def result_rows(result: ScenarioResult) -> list[ReferenceOrder]:
    """Mean selections of a scenario run, in reference-row form."""
    return [ReferenceOrder(n, z, c, b, v) for (n, z, c, b), v in result.mean_detail().items()]


@dataclass
class CoverageTable:
    zone_class: str
    carriers: list[str]
    networks: list[str]
    cells: dict[tuple[str, str], float | None]
    average: dict[str, float | None]
    absent_networks: set[str] = field(default_factory=set)
    not_covered: list[tuple[str, str, str, float]] = field(default_factory=list)

    def cell(self, carrier: str, network: str) -> float | None:
        return self.cells.get((carrier, network))


def _ordered_union(*seqs: Iterable[str]) -> list[str]:
    out: dict[str, None] = {}
    for s in seqs:
        for x in s:
            out.setdefault(x, None)
    return list(out)


def coverage(
    simulated: ScenarioResult | Iterable[ReferenceOrder] | Mapping[tuple[str, str, str, str], float],
    reference: Iterable[ReferenceOrder],
    zone_class: str,
) -> CoverageTable:
    """Per (carrier, network) coverage of ``reference`` by ``simulated``.

    Simulated counts with no matching reference count are listed in
    ``not_covered`` rather than raising.  Networks that only appear in the
    simulated data are listed in ``absent_networks``.
    """
    if zone_class not in ZONE_CLASSES:
        raise CoverageError(f"unknown zone_class {zone_class!r}")
    if isinstance(simulated, ScenarioResult):
        sim_rows = result_rows(simulated)
    elif isinstance(simulated, Mapping):
        sim_rows = [ReferenceOrder(*k, v) for k, v in simulated.items()]
    else:
        sim_rows = list(simulated)
    sim_rows = [r for r in validate_rows(sim_rows) if r.zone_class == zone_class]
    ref_rows = [r for r in validate_rows(reference) if r.zone_class == zone_class]
    if not ref_rows:
        raise CoverageError(f"reference has no rows for zone_class {zone_class!r}")

    sim: dict[tuple[str, str], dict[str, float]] = defaultdict(dict)
    for r in sim_rows:
        sim[(r.carrier_id, r.network_id)][r.weight_band] = r.count
    ref: dict[tuple[str, str], dict[str, float]] = defaultdict(dict)
    for r in ref_rows:
        ref[(r.carrier_id, r.network_id)][r.weight_band] = r.count

    ref_networks = _ordered_union(r.network_id for r in ref_rows)
    networks = _ordered_union(ref_networks, (r.network_id for r in sim_rows))
    carriers = _ordered_union((r.carrier_id for r in ref_rows), (r.carrier_id for r in sim_rows))

    cells: dict[tuple[str, str], float | None] = {}
    not_covered: list[tuple[str, str, str, float]] = []
    for key in set(ref) | set(sim):
        ref_bands = ref.get(key, {})
        sim_bands = sim.get(key, {})
        matched: dict[str, float] = {}
        for band, rc in ref_bands.items():
            if band == ALL_BANDS:
                matched[band] = sum(sim_bands.values())
            else:
                matched[band] = sim_bands.get(band, 0.0)
        unmatched = {} if ALL_BANDS in ref_bands else {
            b: v for b, v in sim_bands.items() if b not in ref_bands
        }
        for band, rc in ref_bands.items():
            if rc == 0 and matched[band] > 0:
                unmatched[band] = matched[band]
        for band, v in sorted(unmatched.items()):
            if v > 0:
                not_covered.append((key[0], key[1], band, v))

        denom = sum(ref_bands.values())
        if denom > 0:
            overlap = sum(min(matched[b], rc) for b, rc in ref_bands.items())
            cells[key] = 100.0 * overlap / denom
        else:
            cells[key] = None

    average: dict[str, float | None] = {}
    for n in networks:
        vals = [v for (c, net), v in cells.items() if net == n and v is not None]
        average[n] = sum(vals) / len(vals) if vals else None

    not_covered.sort()
    return CoverageTable(
        zone_class=zone_class,
        carriers=carriers,
        networks=networks,
        cells=cells,
        average=average,
        absent_networks=set(networks) - set(ref_networks),
        not_covered=not_covered,
    )
