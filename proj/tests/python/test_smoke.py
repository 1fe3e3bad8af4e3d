import json
import math
import os
import subprocess

import pytest

import parrot_sim as ps


SPEC = {
    "sim": {
        "total_clients": 30,
        "concurrent_clients": 10,
        "num_devices": 3,
        "total_rounds": 4,
        "seed": 5,
    },
    "data": {"samples": 1500, "holdout": 200, "quantity_skew": 0.5},
    "devices": {"hetero_ratios": [0.0, 1.0]},
}


def test_selection_is_deterministic():
    a = ps.select_clients(100, 10, seed=3, round=2, total_rounds=5)
    assert a == ps.select_clients(100, 10, seed=3, round=2, total_rounds=5)
    assert len(set(a)) == 10
    assert a == sorted(a)
    with pytest.raises(ValueError):
        ps.select_clients(5, 10, seed=0, round=0)


def test_partition_sizes_sum():
    sizes = ps.partition_sizes(1000, 20, quantity_skew=0.3, min_samples=5, seed=1)
    assert sum(sizes) == 1000
    assert min(sizes) >= 5
    assert ps.partition_sizes(100, 4) == [25, 25, 25, 25]


def test_fit_two_points():
    fit = ps.fit_workload([10, 20], [1.2, 2.2])
    assert fit["t_sample"] == pytest.approx(0.1)
    assert fit["b"] == pytest.approx(0.2)
    assert fit["status"] == "ok"


def test_greedy_worked_example():
    plan = ps.schedule_greedy([5, 4, 3, 3, 2], [1.0, 1.0], [0.0, 0.0])
    assert ps.makespan(plan, [5, 4, 3, 3, 2], [1.0, 1.0], [0.0, 0.0]) == 9.0
    assert [len(d) for d in ps.uniform_division(list(range(10)), 4)] == [3, 3, 2, 2]


def test_report_time():
    assert ps.report_time(2.0, 0.5, False, 0, 0, 10) == pytest.approx(3.0)
    assert ps.report_time(1.0, 0.0, True, 0, 0, 10) == pytest.approx(2.0)


def test_expected_costs():
    c = ps.expected_costs("parrot", 1000, 100, 8, s_m=1000, s_a=100, s_e=0, s_d=0)
    assert c["trips_up"] == 8
    assert c["bytes_avg_params"] == 800


def test_run_experiment(tmp_path):
    summary = ps.run_experiment(SPEC, str(tmp_path / "run"))
    assert summary["arm"]["num_devices"] == 3
    assert summary["cost_mismatches"] == []
    assert 0.0 <= summary["final_accuracy"] <= 1.0
    assert math.isfinite(summary["mean_round_seconds"])
    assert (tmp_path / "run" / "rounds.tsv").exists()
    assert "## communication vs cost model" in ps.report(str(tmp_path))


def test_bad_spec_is_value_error(tmp_path):
    bad = json.loads(json.dumps(SPEC))
    bad["sim"]["bogus"] = 1
    with pytest.raises(ValueError):
        ps.run_experiment(bad, str(tmp_path / "bad"))


@pytest.mark.skipif("PARROT_SIM_CLI" not in os.environ, reason="CLI not built")
def test_cli_matches_module(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SPEC))
    subprocess.run([os.environ["PARROT_SIM_CLI"], "run", str(spec), "--out", str(tmp_path / "cli")], check=True)
    ps.run_experiment(SPEC, str(tmp_path / "py"))
    assert (tmp_path / "cli" / "plans.tsv").read_text() == (tmp_path / "py" / "plans.tsv").read_text()
