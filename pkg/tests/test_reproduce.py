import json

import pytest

from eitlab.analysis import crystal, omega_scan, ordered_map, scaling_from_scan, worker_count
from eitlab.cli import main
from eitlab.params import mhz, apparatus_defaults
from eitlab.reproduce import FIG10_N, FIGURES, reproduce


def _checks(rep):
    return {c.quantity: c for c in rep.checks}


def test_fig3_summary():
    checks = _checks(reproduce("fig3"))
    assert checks["atomic transparency without control"].passed
    assert checks["atomic transparency with control"].passed
    assert checks["transparency dip hwhm"].passed


def test_fig8_outputs_and_alpha(tmp_path):
    rep = reproduce("fig8")
    traces = [n for n in rep.writers if n.startswith("fig8_omega_")]
    assert len(traces) == 5 and "fig8_scaling.csv" in rep.writers
    assert _checks(rep)["alpha from buildup rates"].computed == pytest.approx(2.19, abs=0.1)


def test_fig10_narrowing():
    rep = reproduce("fig10")
    assert all(c.passed for c in rep.checks)
    assert sum(n.startswith("fig10_n_") for n in rep.writers) == len(FIG10_N)


def test_fig11_round_trip():
    rep = reproduce("fig11")
    assert all(c.passed for c in rep.checks if "fit/injected" in c.quantity)


def test_unknown_figure():
    with pytest.raises(KeyError):
        reproduce("fig4")
    assert "fig4" not in FIGURES


def test_reproduce_cli_bit_identical(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema_version": 1, "reproduce": {"figure": "fig8"}}))
    monkeypatch.setenv("EITLAB_WORKERS", "1")
    assert main(["reproduce", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("EITLAB_WORKERS", "4")
    assert main(["reproduce", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    man_a = json.loads((tmp_path / "a/manifest.json").read_text())
    man_b = json.loads((tmp_path / "b/manifest.json").read_text())
    assert man_a["outputs"] == man_b["outputs"]
    assert len(man_a["outputs"]) == 10
    assert "fig8_summary.txt" in [o["file"] for o in man_a["outputs"]]


def test_worker_env(monkeypatch):
    monkeypatch.setenv("EITLAB_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("EITLAB_WORKERS", "junk")
    assert worker_count(2) == 2
    assert ordered_map(lambda x: x * x, range(7), workers=3) == [x * x for x in range(7)]


def test_scan_rates_track_widths():
    base = apparatus_defaults(g_n=mhz(16.2))
    pts = omega_scan(base, [mhz(w) for w in (4.0, 6.0, 8.0)])
    for p in pts:
        assert p.ratio == pytest.approx(1.0, abs=0.15)
    hw = scaling_from_scan(pts, base, "hwhm")
    rt = scaling_from_scan(pts, base, "rate")
    assert rt.alpha / hw.alpha == pytest.approx(1.0, abs=0.15)


def test_crystal_scaling():
    base = apparatus_defaults()
    a, b = crystal(400, base), crystal(1600, base)
    assert b.g_n / a.g_n == pytest.approx(2.0)
    assert b.cooperativity / a.cooperativity == pytest.approx(4.0)
