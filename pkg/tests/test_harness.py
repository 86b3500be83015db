import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from rtumpc.core import LADDER
from rtumpc.harness import (
    RoundLog,
    Scenario,
    budget_study,
    check_invariants,
    cpr_reward,
    discomfort,
    inject_noise,
    load_controller_model,
    run,
)

# --- noise ---------------------------------------------------------------


def test_noise_starts_exact_and_can_be_disabled():
    rng = np.random.default_rng(0)
    x = np.linspace(20, 30, 24)
    y = inject_noise(x, 2.0, rng)
    assert y[0] == x[0] and not np.array_equal(y, x)
    assert np.array_equal(inject_noise(x, 2.0, rng, enabled=False), x)


def test_noise_std_reaches_target_at_horizon_end():
    rng = np.random.default_rng(1)
    x = np.zeros(24)
    last = np.array([inject_noise(x, 1.5, rng)[-1] for _ in range(10_000)])
    assert last.std() == pytest.approx(1.5, rel=0.1)
    mid = np.array([inject_noise(x, 1.5, rng)[12] for _ in range(2_000)])
    assert mid.std() < last.std()


# --- metrics -------------------------------------------------------------


def test_discomfort_one_degree_one_step():
    d = discomfort(np.array([[25.0]]), np.array([[20.0]]), np.array([[24.0]]))
    assert d[0] == pytest.approx(1 / 12)
    d = discomfort(np.array([[18.0, 19.0]]), np.array([[20.0, 20.0]]), np.array([[24.0, 24.0]]))
    assert d[0] == pytest.approx(3 / 12)


def test_discomfort_zero_inside_bounds():
    theta = np.random.default_rng(2).uniform(20, 24, size=(50, 2))
    assert np.all(discomfort(theta, np.full_like(theta, 20.0), np.full_like(theta, 24.0)) == 0)


def _log(step, curtail, event=True):
    return RoundLog(step, "", [0], [22.0], [20.0], [24.0], 0.0, 0.0, 0.0, 0.0, cpr_event=event,
                    curtailment_kwh=curtail)


def test_cpr_reward_uses_event_total():
    logs = [_log(0, 0.5), _log(1, -0.2), _log(2, 9.0, event=False)]
    assert cpr_reward(logs, 0.55) == pytest.approx(0.55 * 0.3)
    assert cpr_reward([_log(0, -1.0)], 0.55) == 0.0


# --- scenario ------------------------------------------------------------


def test_scenario_json_round_trip(tmp_path):
    sc = Scenario(controller="greedy", program="cpr", cpr_event=(13, 17), budget_evals=123)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(sc.to_json()))
    assert Scenario.load(path) == sc


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(controller="pid")
    with pytest.raises(ValueError):
        Scenario(program="spot")
    with pytest.raises(ValueError):
        Scenario(days=0)
    with pytest.raises(ValueError):
        Scenario.from_json({"controller": "greedy", "colour": "red"})


def test_controller_model_checks(arx_model):
    assert load_controller_model(Scenario(controller="greedy")) is None
    with pytest.raises(FileNotFoundError):
        load_controller_model(Scenario(controller="convex"))
    with pytest.raises(ValueError):
        load_controller_model(Scenario(controller="convex"), arx_model)


# --- closed loop ---------------------------------------------------------


def test_greedy_hot_day(greedy_flat):
    s = greedy_flat.summary
    assert s.steps == 288
    assert s.avg_discomfort_c > 0 and s.toggling == 0
    assert check_invariants(greedy_flat, Scenario(controller="greedy")) == []


def test_run_outputs(greedy_flat, tmp_path):
    greedy_flat.write(tmp_path)
    rows = list(csv.DictReader((tmp_path / "rounds.csv").open()))
    assert len(rows) == 288 and tuple(rows[0]) == RoundLog.CSV_FIELDS
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["energy_kwh"] == greedy_flat.summary.energy_kwh
    assert (tmp_path / "bids.jsonl").read_text() == ""


@pytest.mark.parametrize("fixture", ["convex_flat", "convex_cpr"])
def test_closed_loop_invariants(fixture, request):
    res = request.getfixturevalue(fixture)
    sc = Scenario(controller="convex", program=res.summary.program)
    assert check_invariants(res, sc) == []
    codes = np.array([r.codes for r in res.logs])
    assert codes.min() >= 0 and codes.max() < len(LADDER)
    energy = sum(r.energy_kwh for r in res.logs)
    assert energy == pytest.approx(res.summary.energy_kwh)


def test_bidding_accounting(convex_bidding):
    res, bench = convex_bidding
    sc = Scenario(controller="convex", program="bidding")
    assert check_invariants(res, sc) == []
    assert bench.summary.bids == 0 and bench.summary.market_rewards == 0.0
    assert res.summary.net_cost == res.summary.energy_cost - res.summary.market_rewards
    assert res.summary.savings_pct == pytest.approx(
        100 * (bench.summary.net_cost - res.summary.net_cost) / bench.summary.net_cost)


def test_cpr_rebate_matches_logs(convex_cpr):
    logs = convex_cpr.logs
    event = [r for r in logs if r.cpr_event]
    assert len(event) == 72
    assert convex_cpr.summary.cpr_reward == pytest.approx(0.55 * max(0.0, sum(r.curtailment_kwh for r in event)))


def test_invariant_check_catches_tampering(greedy_flat):
    sc = Scenario(controller="greedy")
    bad = replace(greedy_flat.summary, net_cost=greedy_flat.summary.net_cost + 1.0, toggling=2)
    problems = check_invariants(replace(greedy_flat, summary=bad), sc)
    assert len(problems) == 2


def test_rejecting_iso_pays_nothing(icrnn_model):
    sc = Scenario(controller="convex", program="bidding", p_clear=0.0, budget_evals=150)
    res = run(sc, icrnn_model)
    s = res.summary
    assert s.bids > 0
    assert s.called == 0 and s.market_rewards == 0.0 and s.guard_delivery == 0
    assert s.net_cost == s.energy_cost
    assert check_invariants(res, sc) == []


def test_linear_controller_runs(arx_model):
    sc = Scenario(controller="linear", budget_evals=150)
    res = run(sc, arx_model)
    assert res.summary.steps == 288
    assert check_invariants(res, sc) == []


def test_budget_study_identical_budgets(icrnn_model):
    study = budget_study(Scenario(controller="convex", budget_evals=100), [100, 100], 0.05, icrnn_model)
    assert len(study.rounds) == round(0.05 * 288)
    assert study.identical == [1.0] and study.monotone
    assert np.all(study.gaps[0] == 0)


def test_budget_study_rejects_decreasing(icrnn_model):
    with pytest.raises(ValueError):
        budget_study(Scenario(controller="convex"), [200, 100], 0.05, icrnn_model)
