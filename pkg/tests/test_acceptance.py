"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

from __future__ import annotations

import itertools
import time
from dataclasses import replace

import numpy as np
import pytest

from helpers import random_icrnn, round_state
from rtumpc import control, solver
from rtumpc.harness import Scenario, budget_study, run
from rtumpc.models import IcrnnParams, evaluate_rmse, icrnn_forward, loss_and_grad


@pytest.fixture
def report(capsys):
    def _report(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} | {detail}")
    return _report


def test_icrnn_jensen_and_monotone(icrnn_model, report):
    t0 = time.perf_counter()
    p = icrnn_model.params
    rng = np.random.default_rng(2024)
    L = p.window + 24
    X = rng.uniform(-0.5, 1.5, size=(1000, L, p.n_in))
    Y = rng.uniform(-0.5, 1.5, size=(1000, L, p.n_in))
    lam = rng.uniform(0, 1, size=(1000, 1, 1))
    fx, fy = icrnn_forward(p, X, 24), icrnn_forward(p, Y, 24)
    fm = icrnn_forward(p, lam * X + (1 - lam) * Y, 24)
    gap = float(np.max(fm - (lam * fx + (1 - lam) * fy)))
    # raising any single input coordinate never lowers any output
    base = rng.uniform(0, 1, size=(L, p.n_in))
    f0 = icrnn_forward(p, base, 24)
    worst = np.inf
    for j in range(p.n_in):
        up = base.copy()
        up[:, j] += 0.5
        worst = min(worst, float(np.min(icrnn_forward(p, up, 24) - f0)))
    elapsed = time.perf_counter() - t0
    ok = gap <= 1e-9 and worst >= -1e-12 and elapsed < 10
    report(1, ok, f"max Jensen gap {gap:.2e}, min monotone delta {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_training_gradients_match_finite_differences(report):
    eps = 1e-6
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n_in, n_h, n_out = int(rng.integers(2, 6)), int(rng.integers(2, 9)), int(rng.integers(1, 3))
        p = IcrnnParams.init(n_in, n_h, n_out, seed=seed, window=3)
        p.b_h[:] = rng.uniform(0.05, 0.3, n_h)  # keep units away from the relu kink
        X = rng.uniform(0, 1, size=(4, 7, n_in))
        Y = rng.normal(size=(4, 4, n_out))
        _, grads = loss_and_grad(p, X, Y)
        for name, arr in p.arrays().items():
            num = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + eps
                lp, _ = loss_and_grad(p, X, Y)
                arr[idx] = orig - eps
                lm, _ = loss_and_grad(p, X, Y)
                arr[idx] = orig
                num[idx] = (lp - lm) / (2 * eps)
            scale = max(np.linalg.norm(num), np.linalg.norm(grads[name]), 1e-8)
            worst = max(worst, float(np.linalg.norm(num - grads[name]) / scale))
    ok = worst <= 1e-4
    report(2, ok, f"worst relative gradient error {worst:.2e} over 10 networks")
    assert ok


def test_model_ordering(month_dataset, icrnn_model, arx_model, mean_model, report):
    r = {m.kind: evaluate_rmse(m, month_dataset, "test").overall for m in (icrnn_model, arx_model, mean_model)}
    ok = r["icrnn"] < r["arx"] < r["mean"]
    report(3, ok, "held-out RMSE icrnn {icrnn:.4f} < arx {arx:.4f} < mean {mean:.4f} °C".format(**r))
    assert ok


def _oracle_instance(seed: int):
    rng = np.random.default_rng(seed)
    model = random_icrnn(1, seed=seed)
    from helpers import flat_setup

    schedule, tariff = flat_setup(1, 4, upper=24.0, rate=float(rng.uniform(0.03, 0.2)),
                                  demand=float(rng.uniform(0, 1)))
    cfg = control.MpcConfig(1, model, schedule, tariff, horizon=4, lockout=2)
    applied = rng.integers(0, 4, size=(3, 1))
    state = round_state(1, 4, theta=float(rng.uniform(23.4, 24.3)), applied=applied)
    return control.build_base(cfg, state)


def test_solver_matches_enumeration(report):
    t0 = time.perf_counter()
    hits, h_ok, infeasible = 0, True, 0
    for seed in range(20):
        inst = _oracle_instance(seed)
        grid = np.array(list(itertools.product(range(4), repeat=4)))
        F, G = inst.evaluate(grid)
        H = solver.violation(G)
        feas = H == 0
        res = solver.solve(inst.problem(), np.zeros(4, dtype=np.int64), solver.Budget(512, seed=seed))
        if feas.any():
            hits += res.h == 0 and np.isclose(res.f, F[feas].min(), rtol=0, atol=1e-12)
        else:
            infeasible += 1
            hits += np.isclose(res.h, H.min(), rtol=0, atol=1e-12)
            h_ok &= bool(np.isclose(res.h, H.min(), rtol=0, atol=1e-12))
    elapsed = time.perf_counter() - t0
    ok = hits >= 19 and h_ok and elapsed < 120
    report(4, ok, f"{hits}/20 optimal ({infeasible} infeasible instances matched min h: {h_ok}), {elapsed:.1f}s")
    assert ok


def test_closed_loop_flat_rate(greedy_flat, convex_flat, report):
    g, c = greedy_flat.summary, convex_flat.summary
    ratio = c.avg_discomfort_c / g.avg_discomfort_c
    energy = c.energy_kwh / g.energy_kwh
    ok = g.avg_discomfort_c > 0 and ratio <= 0.5 and 0.85 <= energy <= 1.15 and g.toggling == 0 and c.toggling == 0
    report(5, ok, f"discomfort {c.avg_discomfort_c:.4f} vs greedy {g.avg_discomfort_c:.4f} °C (ratio {ratio:.3f}), "
                  f"energy {c.energy_kwh:.1f} vs {g.energy_kwh:.1f} kWh, toggling {c.toggling}/{g.toggling}")
    assert ok


def test_bidding_delivery_and_rewards(convex_bidding, report):
    res, bench = convex_bidding
    s = res.summary
    called = [b for _, b in sorted(res.book.bids.items()) if b.called]
    delivered = all(b.delivered for b in called)
    expected = 0.0
    for b in called:
        expected += b.mcp * b.quantity * res.book.dt
    ok = delivered and s.market_rewards == expected and s.net_cost <= bench.summary.net_cost and len(called) > 0
    report(6, ok, f"{len(called)} called of {s.bids} bids all delivered: {delivered}; rewards {s.market_rewards:.4f} $ "
                  f"(exact match {s.market_rewards == expected}); net {s.net_cost:.3f} vs benchmark "
                  f"{bench.summary.net_cost:.3f} $ (savings {s.savings_pct:.1f}%)")
    assert ok


def test_cpr_event_curtailment(convex_cpr, report):
    s = convex_cpr.summary
    ok = s.event_energy_kwh < s.event_baseline_kwh and s.toggling == 0
    report(7, ok, f"event energy {s.event_energy_kwh:.2f} < baseline {s.event_baseline_kwh:.2f} kWh, "
                  f"rebate {s.cpr_reward:.2f} $, toggling {s.toggling}")
    assert ok


def test_budget_monotonicity(icrnn_model, report):
    study = budget_study(Scenario(controller="convex"), [1000, 2000], 0.3, icrnn_model, seed=0)
    ok = study.monotone and len(study.rounds) == round(0.3 * 288)
    report(8, ok, f"{len(study.rounds)} sampled rounds, 2B never worse: {study.monotone}, "
                  f"identical solutions B vs 2B: {100 * study.identical[0]:.1f}%")
    assert ok


def test_summary_is_reproducible(icrnn_model, tmp_path, report):
    sc = Scenario(controller="convex", program="bidding", budget_evals=400)
    for d in ("a", "b"):
        run(sc, icrnn_model).write(tmp_path / d)
    a = (tmp_path / "a" / "summary.json").read_bytes()
    b = (tmp_path / "b" / "summary.json").read_bytes()
    rounds_same = (tmp_path / "a" / "rounds.csv").read_bytes() == (tmp_path / "b" / "rounds.csv").read_bytes()
    ok = a == b and rounds_same
    report(9, ok, f"summary.json byte-identical: {a == b}, rounds.csv identical: {rounds_same}")
    assert ok
