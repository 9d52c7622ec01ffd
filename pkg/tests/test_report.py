"""Serialization and plotting: JSON round-trip through validation, golden
CSV bodies for hand-computed inputs, and byte-deterministic SVG with one
polyline per condition.
"""

import pytest

from cbb.errors import ManifestError
from cbb.metrics import DynamicsRow, HumanData, RacRecord, summarize
from cbb.report import (
    curve_csv,
    dynamics_csv,
    load_report,
    records_csv,
    report_json_str,
    summary_md,
    svg_detection_curve,
    svg_dynamics,
)


def _change(tid, cond, a_init, a_out, value):
    return RacRecord(
        trial_id=tid, condition=cond, a_init=a_init, a_out=a_out,
        rac=value, rel_delta=None,
    )


@pytest.fixture()
def report():
    records = [
        _change("0000_CONCAVE", "CONCAVE", 1000, 1007, 0.007),
        _change("0001_CONCAVE", "CONCAVE", 1000, 1500, 0.5),
        _change("0002_NOFILL", "NOFILL", 1000, 1020, 0.02),
        _change("0003_CONVEX", "CONVEX", 1000, 2000, 1.0),
        RacRecord(
            trial_id="0004_NOCHANGE", condition="NOCHANGE",
            a_init=1000, a_out=1000, rac=None, rel_delta=0.0,
        ),
    ]
    return summarize("demo", "closing:4", records, tau_grid=(0.5, 1.0, 2.0))


def test_report_json_roundtrip(report, tmp_path):
    fitted = report.with_fit(HumanData(concave=0.5, nofill=1.0, convex=1.0))
    path = tmp_path / "report.json"
    path.write_text(report_json_str(fitted))
    assert load_report(path) == fitted


def test_load_report_rejects_malformed(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    with pytest.raises(ManifestError):
        load_report(bad)
    bad.write_text("not json at all")
    with pytest.raises(ManifestError):
        load_report(bad)


def test_records_csv_golden(report):
    assert records_csv(report) == (
        "trial_id,condition,a_init,a_out,rac,rel_delta\n"
        "0000_CONCAVE,CONCAVE,1000,1007,0.007,\n"
        "0001_CONCAVE,CONCAVE,1000,1500,0.5,\n"
        "0002_NOFILL,NOFILL,1000,1020,0.02,\n"
        "0003_CONVEX,CONVEX,1000,2000,1.0,\n"
        "0004_NOCHANGE,NOCHANGE,1000,1000,,0.0\n"
    )


def test_curve_csv_golden(report):
    # rates derived by hand: strict comparisons against 0.005, 0.01, 0.02
    assert curve_csv(report) == (
        "tau_percent,CONCAVE,NOFILL,CONVEX,NOCHANGE\n"
        "0.5,1.0,1.0,1.0,0.0\n"
        "1,0.5,1.0,1.0,0.0\n"
        "2,0.5,0.0,1.0,0.0\n"
    )


def test_dynamics_csv_golden():
    rows = [
        DynamicsRow("epoch_0", {"CONCAVE": 0.25, "NOFILL": 0.5, "CONVEX": 1.0}),
        DynamicsRow("epoch_1", {"CONCAVE": 0.75, "NOFILL": 1.0, "CONVEX": 1.0}),
    ]
    assert dynamics_csv(rows) == (
        "label,CONCAVE,NOFILL,CONVEX\n"
        "epoch_0,0.25,0.5,1.0\n"
        "epoch_1,0.75,1.0,1.0\n"
    )


def test_svg_curve_structure_and_determinism(report):
    svg = svg_detection_curve(report)
    assert svg == svg_detection_curve(report)
    assert svg.startswith("<svg ")
    assert svg.rstrip().endswith("</svg>")
    assert svg.count("<polyline ") == 4
    assert "threshold tau (%)" in svg
    assert "detection rate" in svg
    for cond in ("CONCAVE", "NOFILL", "CONVEX", "NOCHANGE"):
        assert f">{cond}</text>" in svg


def test_svg_dynamics_structure_and_determinism():
    rows = [
        DynamicsRow("epoch_0", {"CONCAVE": 0.2, "NOFILL": 0.6, "CONVEX": 1.1}),
        DynamicsRow("epoch_1", {"CONCAVE": 0.5, "NOFILL": 0.8, "CONVEX": 1.05}),
        DynamicsRow("epoch_2", {"CONCAVE": 0.9, "NOFILL": 0.95, "CONVEX": 1.0}),
    ]
    svg = svg_dynamics(rows)
    assert svg == svg_dynamics(rows)
    assert svg.count("<polyline ") == 3
    for label in ("epoch_0", "epoch_1", "epoch_2"):
        assert label in svg
    with pytest.raises(ValueError):
        svg_dynamics([])


def test_summary_md_contents(report):
    fitted = report.with_fit(HumanData(concave=0.5, nofill=1.0, convex=1.0))
    text = summary_md(fitted)
    assert "`demo`" in text
    assert "`closing:4`" in text
    assert "| CONCAVE |" in text
    assert "tau* = 1%" in text
    assert "False-alarm rate at tau = 1%: 0.0000" in text
    # without a fit, the false-alarm line falls back to the smallest threshold
    bare = summary_md(report)
    assert "tau*" not in bare
    assert "False-alarm rate at tau = 0.5%" in bare
