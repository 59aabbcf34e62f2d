"""CSV and Markdown renderings of calibration, scenario and coverage results."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Sequence

from .choice import DROP_REASONS
from .coverage import CoverageTable, result_rows
from .scenarios import DROPPED, ScenarioResult
from .tariff import CalibrationRow


def _num(x: float | None, digits: int = 4) -> str:
    if x is None:
        return ""
    if float(x).is_integer():
        return str(int(x))
    return f"{x:.{digits}f}"


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def calibration_csv(rows: Iterable[CalibrationRow]) -> str:
    return _csv_text(
        ("carrier", "target", "achieved", "base_fee"),
        ((r.carrier, _num(r.target), _num(r.achieved), _num(r.base_fee)) for r in rows),
    )


def scenario_csv(result: ScenarioResult) -> str:
    reps = [f"rep_{i + 1}" for i in range(result.replications)]
    rows = []
    for n in result.networks:
        for c in result.carriers:
            counts = result.selected_counts(n, c)
            rows.append([n, c, *counts, _num(result.mean_selected(n, c)),
                         _num(result.cell_deviation_pct(n, c))])
        for reason in DROP_REASONS:
            counts = result.dropped_counts(n, reason)
            if any(counts):
                rows.append([n, f"{DROPPED}:{reason}", *counts, _num(sum(counts) / len(counts)), ""])
        counts = result.dropped_counts(n)
        rows.append([n, DROPPED, *counts, _num(result.mean_dropped(n)), ""])
    return _csv_text(("network", "carrier", *reps, "mean", "deviation_pct"), rows)


def selections_csv(result: ScenarioResult) -> str:
    rows = result_rows(result)
    return _csv_text(
        ("network", "zone_class", "carrier", "weight_band", "count"),
        ((r.network_id, r.zone_class, r.carrier_id, r.weight_band, f"{r.count:.10g}") for r in rows),
    )


def _md_table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(x) for x in row) + " |" for row in rows]
    return "\n".join(lines)


def scenario_markdown(result: ScenarioResult) -> str:
    """Carriers as rows; average price, one column per network, % deviation."""
    header = ["Carrier", "Avg price (USD)", *result.networks, "% deviation"]
    rows = []
    for c in result.carriers:
        price = result.calibrated_price(c)
        if price is None:
            price = result.avg_quoted_price(c)
        rows.append([
            c,
            _num(price, 2),
            *(_num(result.mean_selected(n, c), 1) for n in result.networks),
            _num(result.carrier_deviation_pct(c), 1),
        ])
    rows.append(["Dropped", "-", *(_num(result.mean_dropped(n), 1) for n in result.networks), "-"])
    rows.append(["Total", "-", *(_num(sum(result.generated_counts(n)) / result.replications, 1)
                                 for n in result.networks), "-"])
    title = f"## Scenario {result.scenario_id}"
    if result.label:
        title += f": {result.label}"
    notes = [
        "",
        f"Seed {result.seed}, {result.replications} replications; counts are replication means.",
    ]
    if result.deviation_flag:
        notes.append("")
        notes.append("**Far-rural deviation gate failed:**")
        for rep, r in result.failed_deviation_checks():
            notes.append(
                f"- replication {rep + 1}, {r.network_id}: observed {r.observed_pct:.2f}% vs "
                f"target {r.target_pct:g}% ({r.rel_deviation_pct:.1f}% relative)"
            )
    return "\n".join([title, "", _md_table(header, rows), *notes]) + "\n"


def coverage_csv(table: CoverageTable) -> str:
    rows = []
    for c in table.carriers:
        for n in table.networks:
            rows.append([c, n, "absent" if n in table.absent_networks else _num(table.cell(c, n), 2)])
    for n in table.networks:
        rows.append(["Average", n, "absent" if n in table.absent_networks else _num(table.average[n], 2)])
    return _csv_text(("carrier", "network", "coverage_pct"), rows)


def coverage_markdown(table: CoverageTable) -> str:
    header = ["Carrier", *(f"{n}, %" for n in table.networks)]

    def fmt(n: str, v: float | None) -> str:
        if n in table.absent_networks:
            return "absent"
        return "-" if v is None else _num(v, 2)

    rows = [[c, *(fmt(n, table.cell(c, n)) for n in table.networks)] for c in table.carriers]
    rows.append(["Average", *(fmt(n, table.average[n]) for n in table.networks)])
    label = "far rural" if table.zone_class == "far_rural" else "domestic"
    parts = [f"## Coverage of reference orders, {label} zones", "", _md_table(header, rows)]
    if table.not_covered:
        parts += ["", "Simulated selections without a reference count:"]
        parts += [f"- {c} / {n} / band {b}: {_num(v, 2)}" for c, n, b, v in table.not_covered]
    return "\n".join(parts) + "\n"
