"""Acceptance battery: one test, and one printed PASS/FAIL line, per criterion."""
import pytest

from wiener_projection.validate import CRITERIA, run_battery

IDS = [*CRITERIA, "C10"]


@pytest.fixture(scope="module")
def battery():
    return {r.id: r for r in run_battery()}


@pytest.mark.slow
@pytest.mark.parametrize("cid", IDS)
def test_criterion(battery, cid, capsys):
    r = battery[cid]
    with capsys.disabled():
        print(f"\n[{cid}] {'PASS' if r.passed else 'FAIL'}  {r.title}  "
              f"metrics={r.metrics}  thresholds={r.thresholds}")
    assert r.passed, f"{cid} failed: {r.metrics} vs {r.thresholds}"
