import json
import math
from pathlib import Path

import pytest

import multicalf

ROOT = Path(__file__).resolve().parents[2]
CONFIGS = ROOT / "configs"


def naive_tail(lam, p, t, terms=2000):
    prod = 1.0
    for k in range(t, t + terms):
        prod *= 1.0 - lam**k * p
    return prod


def test_tail_product_matches_naive_product():
    assert multicalf.tail_product(0.5, 1.0, 0) == 0.0
    assert multicalf.tail_product(0.5, 0.5, 1) == pytest.approx(naive_tail(0.5, 0.5, 1), abs=1e-14)
    assert multicalf.tail_product(0.5, 0.5, 1) == pytest.approx(0.5776, abs=1e-4)
    detail = multicalf.tail_product_detailed(0.99, 0.8, 5)
    assert detail["value"] == pytest.approx(naive_tail(0.99, 0.8, 5, 20000), rel=1e-10)
    assert detail["truncation_bound"] <= 1e-14


def test_corollary_bound():
    assert multicalf.corollary_lower_bound(0.5, 1.0, 1) == pytest.approx(math.exp(-2.0), rel=1e-15)
    assert multicalf.corollary_lower_bound(0.5, 0.5, 1) <= multicalf.tail_product(0.5, 0.5, 1)
    with pytest.raises(ValueError):
        multicalf.corollary_lower_bound(0.5, 1.0, 0)


def test_summability():
    total, ok = multicalf.summability(0.99, 0.8)
    assert ok
    assert total == pytest.approx(80.0, rel=1e-12)


def test_tau_f_and_beta():
    identity = multicalf.KLCertificate(multicalf.ClassKInf.linear(), multicalf.ClassKInf.linear())
    assert multicalf.compute_tau_f(identity, 10.0, 1.0) == 3
    assert identity.beta(10.0, 3.0) == pytest.approx(10.0 * math.exp(-3.0), rel=1e-14)
    square = multicalf.KLCertificate(multicalf.ClassKInf.linear(), multicalf.ClassKInf.power(2.0))
    assert multicalf.compute_tau_f(square, 10.0, 1.0) == 2
    assert multicalf.ClassKInf.power(2.0).inverse(0.25) == pytest.approx(0.5)


def test_wilson_interval():
    low, high = multicalf.wilson_interval(50, 100)
    assert low < 0.5 < high
    assert multicalf.wilson_interval(10, 10)[1] == 1.0


def test_verify_bounds():
    report = multicalf.verify_bounds(CONFIGS / "bounds_half.json")
    assert report["dominance"] == "pass"
    t1 = next(e for e in report["tail_products"] if e["t"] == 1)
    assert t1["value"] == pytest.approx(0.5776, abs=1e-4)


def test_run_config_is_deterministic(tmp_path):
    cfg = json.loads((CONFIGS / "scalar_fused.json").read_text())
    cfg["run"]["n_rollouts"] = 100
    cfg["run"]["horizon"] = 50
    cfg["output"]["traces"] = 1
    path = tmp_path / "small.json"
    path.write_text(json.dumps(cfg))
    a = multicalf.run_config(path, output=tmp_path / "a")
    b = multicalf.run_config(path, output=tmp_path / "b", workers=2)
    assert "goal_reaching" in a
    assert a["spatial_bounds"]["tau_f"] == 3
    a.pop("generated_at")
    b.pop("generated_at")
    assert a == b
    assert (tmp_path / "a" / "summary.json").exists()
    assert multicalf.run_config(path, seed=5)["master_seed"] == 5


def test_config_errors_raise(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"env": {"kind": "scalar", "w_maxx": 1}}')
    with pytest.raises(multicalf.ConfigError, match="env.w_maxx"):
        multicalf.run_config(path)


def test_run_criterion():
    result = multicalf.run_criterion(5, {"n_rollouts": 1000}, base_dir=ROOT / "acceptance")
    assert result["passed"], result["line"]
    assert result["line"].startswith("PASS  C5")
    assert multicalf.criterion_count == 9
