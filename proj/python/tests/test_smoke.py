import json
import math
from pathlib import Path

import pytest

import pcar

ROOT = Path(__file__).resolve().parents[2]
GOLDEN = json.loads((ROOT / "tests/fixtures/golden.json").read_text())


def test_clock_dynamics():
    assert pcar.initial_state(3, 4) == [4, 4, 4]
    assert pcar.advance([4, 4, 4], 4, 1) == [4, -1, 4]
    assert pcar.advance([4, -1, 4], 4, 1) == [4, -2, 4]
    assert pcar.advance([4, -2, 4], 4, 0) == [-1, 1, 4]


def test_invalid_arm_raises_with_kind():
    with pytest.raises(pcar.PcarError) as info:
        pcar.advance([2, 2], 2, 5)
    assert info.value.kind == "invalid-arm"
    assert isinstance(info.value, ValueError)


@pytest.mark.parametrize("name", sorted(GOLDEN["welch"]))
def test_welch_matches_reference(name):
    case = GOLDEN["welch"][name]
    r = pcar.welch_t(case["x"], case["y"])
    assert r["t"] == pytest.approx(case["t"], rel=1e-9)
    assert r["df"] == pytest.approx(case["df"], rel=1e-9)
    assert r["p"] == pytest.approx(case["p"], rel=1e-9)


def test_pss_trend_and_quantile():
    assert pcar.pss_trend([18.3, 17.0, 16.0]) == pytest.approx(-1.15, abs=1e-12)
    for df, q in GOLDEN["t_quantile_975"].items():
        assert pcar.student_t_quantile(0.975, float(df)) == pytest.approx(q, rel=1e-9)
    assert pcar.sign_test_upper(15, 20) == pytest.approx(21700 / 2**20)


def test_catalog_and_config_load():
    catalog = pcar.load_catalog(ROOT / "data/starter_catalog.tsv")
    assert len(catalog["entries"]) == 16
    assert catalog["entries"][0]["id"] == "meditation_1min"
    cfg = pcar.load_config(ROOT / "configs/default_study.json")
    assert cfg["n_participants"] == 28
    assert cfg["agent"]["lambda"] == 0.6


def test_oracle_check_small_instance():
    r = pcar.oracle_check(arms=2, tau_max=2, horizon=10, seeds=3)
    assert r["optimal"] == pytest.approx(10.5)
    assert r["passed"] == 3


def test_small_study_run(tmp_path):
    config = tmp_path / "small.json"
    config.write_text(json.dumps({
        "schema_version": 1,
        "catalog": str(ROOT / "data/starter_catalog.tsv"),
        "n_participants": 6,
        "weeks_per_phase": 1,
    }))
    a = pcar.run_study(config, tmp_path / "out")
    b = pcar.run_study(config)
    assert a["records"] > 0
    assert a["budget_violations"] == []
    assert a["log_hash"] == b["log_hash"]
    assert (tmp_path / "out/records.csv").exists()
    assert (tmp_path / "out/report/summary.csv").exists()
    assert all(math.isfinite(x) for x in a["pcar_final_reward"])


def test_bad_config_raises():
    with pytest.raises(pcar.PcarError) as info:
        pcar.load_config(ROOT / "does/not/exist.json")
    assert info.value.kind == "io-error"
