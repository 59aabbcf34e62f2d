from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

import carriermix
from carriermix.coverage import (
    CoverageError,
    ReferenceOrder,
    coverage,
    read_counts_csv,
    write_counts_csv,
)

REFERENCE_FIXTURE = Path(carriermix.__file__).parent / "data" / "reference_far_rural.csv"
CARRIERS = ["fedex", "vendor_truck", "supplier_truck", "pickup"]


def rows(counts, zone="far_rural", band="all"):
    return [ReferenceOrder(n, zone, c, band, v) for (c, n), v in counts.items()]


def test_identity():
    ref = rows({(c, n): 10 + i for i, (c, n) in enumerate((c, n) for c in CARRIERS for n in ["S1", "R2"])})
    t = coverage(ref, ref, "far_rural")
    assert all(v == 100 for v in t.cells.values())
    assert t.average == {"S1": 100, "R2": 100}
    assert not t.not_covered and not t.absent_networks


def test_zero_simulated_cell():
    ref = rows({("fedex", "S1"): 40, ("pickup", "S1"): 10})
    sim = rows({("pickup", "S1"): 10})
    t = coverage(sim, ref, "far_rural")
    assert t.cell("fedex", "S1") == 0
    assert t.cell("pickup", "S1") == 100


def test_average_of_s1_column():
    ref = rows({(c, "S1"): 100 for c in CARRIERS})
    sim = rows({(c, "S1"): v for c, v in zip(CARRIERS, [92, 90, 89, 76])})
    t = coverage(sim, ref, "far_rural")
    assert [t.cell(c, "S1") for c in CARRIERS] == [92, 90, 89, 76]
    # oracle: exact arithmetic mean
    assert t.average["S1"] == pytest.approx(float(Fraction(92 + 90 + 89 + 76, 4)))
    assert t.average["S1"] == 86.75


def test_disjoint_cells():
    ref = rows({("fedex", "S1"): 10, ("pickup", "R2"): 5})
    sim = rows({("vendor_truck", "S1"): 10, ("supplier_truck", "R2"): 7})
    t = coverage(sim, ref, "far_rural")
    assert t.cell("fedex", "S1") == 0 and t.cell("pickup", "R2") == 0
    assert t.cell("vendor_truck", "S1") is None
    assert t.average == {"S1": 0, "R2": 0}
    assert {(c, n) for c, n, _, _ in t.not_covered} == {("vendor_truck", "S1"), ("supplier_truck", "R2")}


def test_band_weighting():
    ref = [ReferenceOrder("S1", "far_rural", "fedex", "0-20", 10),
           ReferenceOrder("S1", "far_rural", "fedex", "20-40", 30)]
    sim = [ReferenceOrder("S1", "far_rural", "fedex", "0-20", 25),
           ReferenceOrder("S1", "far_rural", "fedex", "20-40", 15)]
    # min(25,10) + min(15,30) over 40 reference orders
    assert coverage(sim, ref, "far_rural").cell("fedex", "S1") == pytest.approx(100 * 25 / 40)


def test_all_band_sums_simulated_bands():
    ref = rows({("fedex", "S1"): 40})
    sim = [ReferenceOrder("S1", "far_rural", "fedex", b, 10) for b in ("0-20", "20-40", "40-65")]
    t = coverage(sim, ref, "far_rural")
    assert t.cell("fedex", "S1") == 75
    assert not t.not_covered


def test_zero_reference_with_simulation_is_not_covered():
    ref = [ReferenceOrder("S1", "far_rural", "fedex", "0-20", 0),
           ReferenceOrder("S1", "far_rural", "pickup", "0-20", 4)]
    sim = [ReferenceOrder("S1", "far_rural", "fedex", "0-20", 3)]
    t = coverage(sim, ref, "far_rural")
    assert t.cell("fedex", "S1") is None
    assert t.not_covered == [("fedex", "S1", "0-20", 3)]


def test_zone_class_filter_and_missing_reference():
    ref = rows({("fedex", "S1"): 5}, zone="domestic")
    assert coverage(ref, ref, "domestic").cell("fedex", "S1") == 100
    with pytest.raises(CoverageError, match="no rows"):
        coverage(ref, ref, "far_rural")


def test_absent_network():
    ref = rows({("fedex", "S1"): 5})
    sim = rows({("fedex", "S1"): 5, ("fedex", "R3"): 2})
    t = coverage(sim, ref, "far_rural")
    assert t.networks == ["S1", "R3"]
    assert t.absent_networks == {"R3"}
    assert t.average["R3"] is None


def test_duplicate_and_negative_rows_rejected():
    r = ReferenceOrder("S1", "far_rural", "fedex", "all", 1)
    with pytest.raises(CoverageError, match="duplicate"):
        coverage([r], [r, r], "far_rural")
    with pytest.raises(CoverageError, match="negative"):
        coverage([r], [ReferenceOrder("S1", "far_rural", "fedex", "all", -1)], "far_rural")


cell_counts = st.dictionaries(
    st.tuples(st.sampled_from(CARRIERS), st.sampled_from(["S1", "R2", "R3"])),
    st.integers(0, 300), min_size=1,
)


@given(ref=cell_counts, sim=cell_counts)
def test_bounded(ref, sim):
    ref = {k: v + 1 for k, v in ref.items()}
    t = coverage(rows(sim), rows(ref), "far_rural")
    assert all(0 <= v <= 100 for v in t.cells.values() if v is not None)


@given(ref=cell_counts, sim=cell_counts, extra=st.integers(0, 100))
def test_monotone_in_simulated_counts(ref, sim, extra):
    ref = {k: v + 1 for k, v in ref.items()}
    more = {k: v + extra for k, v in sim.items()}
    lo = coverage(rows(sim), rows(ref), "far_rural")
    hi = coverage(rows(more), rows(ref), "far_rural")
    for k, v in lo.cells.items():
        if v is not None:
            assert hi.cells[k] >= v


@given(ref=cell_counts)
def test_identity_law(ref):
    ref = {k: v + 1 for k, v in ref.items()}
    t = coverage(rows(ref), rows(ref), "far_rural")
    assert set(t.cells.values()) == {100.0}


def test_counts_csv_roundtrip(tmp_path):
    data = rows({("fedex", "S1"): 3, ("pickup", "R2"): 2.5})
    write_counts_csv(data, tmp_path / "x.csv")
    assert read_counts_csv(tmp_path / "x.csv") == data


def test_bad_csv_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(CoverageError, match="expected columns"):
        read_counts_csv(p)


def test_reference_fixture_loads():
    ref = read_counts_csv(REFERENCE_FIXTURE)
    assert len(ref) == 15
    assert {r.zone_class for r in ref} == {"far_rural"}
