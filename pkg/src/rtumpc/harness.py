"""Closed-loop experiments: scenarios, rolling-horizon runs and metrics.

Step indices inside a run are global: index 0 is the first pre-roll step
and the scored part of the run starts at ``scenario.preroll``.  Round ``g``
sees the measurement ``θ^{g-1}``, decides the codes applied over step ``g``
and the plant then produces ``θ^g``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any

import numpy as np

from . import control, market, solver
from .core import (
    DT_HOURS,
    LADDER,
    STEPS_PER_DAY,
    ComfortSchedule,
    RtuRating,
    Tariff,
    tou_rate,
)
from .plant import PlantState, RcNetwork, WeatherConfig, WeatherTrace, plant_step, synthesize_weather

CONTROLLERS = ("greedy", "linear", "convex")
PROGRAMS = ("flat", "tou", "bidding", "cpr")

HOT_DAY = WeatherConfig(mean=27.0, amplitude=5.0, daily_mean_std=1.0)


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one closed-loop run."""

    name: str = "hot-day"
    controller: str = "convex"
    program: str = "flat"
    model_path: str | None = None
    start: str = "2021-07-06T00:00:00"  # a Tuesday
    days: int = 1
    preroll: int = 72
    initial_temp: float = 25.0
    weather_seed: int = 11
    weather: dict = field(default_factory=lambda: asdict(HOT_DAY))
    horizon: int = 24
    lockout: int = 3
    budget_evals: int | None = 2000
    budget_seconds: float | None = None
    solver_seed: int = 0
    noise: bool = True
    noise_seed: int = 1
    flat_rate: float = 0.05303
    demand_charge: float = 14.58
    price_seed: int = 3
    price: dict = field(default_factory=lambda: asdict(market.PriceConfig()))
    p_clear: float = 0.9
    p_call: float = 0.4
    iso_seed: int = 5
    benchmark: bool = False  # bidding with λ_- = 0
    cpr_event: tuple[int, int] = (12, 18)
    cpr_rate: float = control.CPR_BASE_RATE
    cpr_reward: float = control.CPR_REWARD
    baseline_weeks: int = 2
    deadband: float = 0.0
    reentry: float = 1.0

    def __post_init__(self) -> None:
        if self.controller not in CONTROLLERS:
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.program not in PROGRAMS:
            raise ValueError(f"unknown program {self.program!r}")
        if self.days < 1 or self.preroll < 0:
            raise ValueError("days must be >= 1 and preroll >= 0")

    @property
    def start_time(self) -> datetime:
        return datetime.fromisoformat(self.start)

    @property
    def n_steps(self) -> int:
        return self.days * STEPS_PER_DAY

    def to_json(self) -> dict:
        d = asdict(self)
        d["cpr_event"] = list(self.cpr_event)
        return d

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        data = dict(data)
        if "cpr_event" in data:
            data["cpr_event"] = tuple(data["cpr_event"])
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Forecast noise
# ---------------------------------------------------------------------------


def inject_noise(series: np.ndarray, std: float, rng: np.random.Generator, enabled: bool = True) -> np.ndarray:
    """Additive Gaussian noise whose std ramps linearly from 0 to ``std`` over the horizon."""
    series = np.asarray(series, dtype=float)
    if not enabled or series.size == 0:
        return series.copy()
    ramp = np.linspace(0.0, 1.0, series.size) if series.size > 1 else np.zeros(1)
    return series + rng.standard_normal(series.size) * std * ramp


@dataclass(frozen=True)
class NoiseLevels:
    oat: float
    ghi: float
    energy_price: float
    mcp: float

    @classmethod
    def from_history(cls, weather: WeatherTrace, prices: market.MarketTrace | None) -> "NoiseLevels":
        e = float(np.std(prices.energy_price)) / 10 if prices is not None else 0.0
        m = float(np.std(prices.mcp)) / 10 if prices is not None else 0.0
        return cls(float(np.std(weather.oat)) / 10, float(np.std(weather.ghi)) / 50, e, m)


# ---------------------------------------------------------------------------
# Logs and metrics
# ---------------------------------------------------------------------------


@dataclass
class RoundLog:
    step: int
    timestamp: str
    codes: list[int]
    theta: list[float]
    lower: list[float]
    upper: list[float]
    power_kw: float
    energy_kwh: float
    energy_price: float
    energy_cost: float
    baseline_kw: float = 0.0
    cpr_event: bool = False
    curtailment_kwh: float = 0.0
    bid_kw: float = 0.0
    reward: float = 0.0
    called: bool = False
    objective: float = float("nan")
    violation: float = float("nan")
    evals: int = 0
    guard_lockout: bool = False
    guard_delivery: bool = False

    CSV_FIELDS = ("step", "timestamp", "codes", "theta", "lower", "upper", "power_kw", "energy_kwh",
                  "energy_price", "energy_cost", "baseline_kw", "cpr_event", "curtailment_kwh", "bid_kw",
                  "reward", "called", "objective", "violation", "evals", "guard_lockout", "guard_delivery")

    def csv_row(self) -> list[str]:
        out = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            if isinstance(v, list):
                out.append(" ".join(repr(x) for x in v))
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


@dataclass
class RunSummary:
    scenario: str
    controller: str
    program: str
    steps: int
    energy_kwh: float
    avg_discomfort_c: float
    discomfort_ch: float
    toggling: int
    peak_kw: float
    energy_cost: float
    market_rewards: float
    cpr_reward: float
    net_cost: float
    event_energy_kwh: float = 0.0
    event_baseline_kwh: float = 0.0
    bids: int = 0
    cleared: int = 0
    called: int = 0
    undelivered: int = 0
    guard_lockout: int = 0
    guard_delivery: int = 0
    infeasible_rounds: int = 0
    savings_pct: float | None = None

    def to_json(self) -> dict:
        return asdict(self)


def discomfort(theta: np.ndarray, lower: np.ndarray, upper: np.ndarray, dt: float = DT_HOURS) -> np.ndarray:
    """Per-step discomfort ``1ᵀ([θ̲-θ]⁺ + [θ-θ̄]⁺) Δt`` in °C·h."""
    exc = np.maximum(lower - theta, 0.0) + np.maximum(theta - upper, 0.0)
    return exc.sum(axis=-1) * dt


def cpr_reward(logs: list[RoundLog], reward: float) -> float:
    total = sum(r.curtailment_kwh for r in logs if r.cpr_event)
    return reward * max(0.0, total)


def metrics(logs: list[RoundLog], scenario: Scenario, history: np.ndarray, book: market.BidBook | None = None,
            dt: float = DT_HOURS) -> RunSummary:
    """Summarize a run from its round logs.

    ``history`` holds the ``ρ+1`` applied codes preceding the first logged
    round so that lock-out checks span the run boundary.
    """
    theta = np.array([r.theta for r in logs])
    lower = np.array([r.lower for r in logs])
    upper = np.array([r.upper for r in logs])
    codes = np.array([r.codes for r in logs])
    d = discomfort(theta, lower, upper, dt)
    energy_cost = float(sum(r.energy_cost for r in logs))
    rewards = float(sum(r.reward for r in logs))
    cpr = cpr_reward(logs, scenario.cpr_reward) if scenario.program == "cpr" else 0.0
    bids = [] if book is None else [b for _, b in sorted(book.bids.items())]
    event = [r for r in logs if r.cpr_event]
    return RunSummary(
        scenario=scenario.name,
        controller=scenario.controller,
        program=scenario.program,
        steps=len(logs),
        energy_kwh=float(sum(r.energy_kwh for r in logs)),
        avg_discomfort_c=float(d.sum() / (len(logs) * dt)),
        discomfort_ch=float(d.sum()),
        toggling=control.count_toggling(codes, scenario.lockout, history),
        peak_kw=float(max(r.power_kw for r in logs)),
        energy_cost=energy_cost,
        market_rewards=rewards,
        cpr_reward=cpr,
        net_cost=energy_cost - rewards - cpr,
        event_energy_kwh=float(sum(r.energy_kwh for r in event)),
        event_baseline_kwh=float(sum(r.baseline_kw * dt for r in event)),
        bids=len(bids),
        cleared=sum(1 for b in bids if any(s == "cleared" for _, s in b.log)),
        called=sum(1 for b in bids if b.called),
        undelivered=sum(1 for b in bids if b.called and b.delivered is False),
        guard_lockout=sum(r.guard_lockout for r in logs),
        guard_delivery=sum(r.guard_delivery for r in logs),
        infeasible_rounds=sum(1 for r in logs if r.violation > 0),
    )


# ---------------------------------------------------------------------------
# Closed loop
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    summary: RunSummary
    logs: list[RoundLog]
    book: market.BidBook | None
    history: np.ndarray
    sampled: list[tuple[int, control.MpcInstance, np.ndarray]] = field(default_factory=list)

    def write(self, outdir: str | Path) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(self.summary.to_json(), sort_keys=True, indent=2) + "\n")
        with open(out / "rounds.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RoundLog.CSV_FIELDS)
            for r in self.logs:
                w.writerow(r.csv_row())
        if self.book is not None:
            self.book.export_jsonl(out / "bids.jsonl")
        else:
            (out / "bids.jsonl").write_text("")


class _World:
    """Ground-truth inputs of a run over the global step index."""

    def __init__(self, scenario: Scenario):
        s = scenario
        self.s = s
        self.network = RcNetwork()
        self.nz = self.network.n_zones
        self.t0 = s.start_time - timedelta(hours=s.preroll * DT_HOURS)
        self.n = s.preroll + s.n_steps
        total = self.n + s.horizon
        days = int(np.ceil(total / STEPS_PER_DAY)) + 1
        self.weather = synthesize_weather(s.weather_seed, days, self.t0, WeatherConfig(**s.weather)).slice(0, total)
        self.exo = self.weather.exogenous()
        ts = self.weather.timestamps
        self.schedule = ComfortSchedule.from_timestamps(ts, self.nz)
        self.prices = None
        if s.program == "flat":
            energy = np.full(total, s.flat_rate)
            self.tariff = Tariff(energy, s.demand_charge)
        elif s.program == "tou":
            self.tariff = Tariff(np.array([tou_rate(t) for t in ts]), 0.0)
        elif s.program == "cpr":
            self.tariff = Tariff(np.full(total, s.cpr_rate), 0.0, cpr_reward=s.cpr_reward)
        else:
            self.prices = market.synthesize_prices(s.price_seed, days, self.t0, market.PriceConfig(**s.price))
            energy = self.prices.energy_price[:total]
            mcp = np.zeros(total) if s.benchmark else self.prices.mcp[:total]
            self.tariff = Tariff(energy, 0.0, curtailment_price=mcp)
        self.event = np.array([s.program == "cpr" and t.weekday() < 5 and s.cpr_event[0] <= t.hour < s.cpr_event[1]
                               for t in ts])
        self.noise = NoiseLevels.from_history(self.weather, self.prices)
        self.baseline = self._baseline() if s.program in ("bidding", "cpr") else np.zeros(total)

    def _baseline(self) -> np.ndarray:
        """Baseline power per global step from greedy runs on earlier same-weekday days."""
        s = self.s
        out = np.zeros(self.n + s.horizon)
        ts = self.weather.timestamps
        profiles: dict[int, market.Baseline] = {}
        for day in sorted({t.date() for t in ts}):
            dow = day.weekday()
            if dow in profiles:
                continue
            history = []
            for w in range(1, s.baseline_weeks + 1):
                start = datetime.combine(day, datetime.min.time()) - timedelta(days=7 * w)
                history.append((start.date(), greedy_day_power(self.network, s, start, seed=s.weather_seed + 1000 * w)))
            profiles[dow] = market.compute_baseline(history, dow)
        for g, t in enumerate(ts):
            b = profiles[t.weekday()]
            out[g] = b.power[(t.hour * 60 + t.minute) // 5]
        return out


def greedy_day_power(network: RcNetwork, scenario: Scenario, start: datetime, seed: int) -> np.ndarray:
    """Power profile ``(288,)`` of the thermostat over one day starting at ``start``."""
    s = scenario
    pre = s.preroll
    t0 = start - timedelta(hours=pre * DT_HOURS)
    trace = synthesize_weather(seed, 2 + pre // STEPS_PER_DAY, t0, WeatherConfig(**s.weather))
    sched = ComfortSchedule.from_timestamps(trace.timestamps[:pre + STEPS_PER_DAY], network.n_zones)
    greedy = control.GreedyController(s.deadband, s.reentry, s.lockout)
    state = PlantState.uniform(network.n_zones, s.initial_temp, t0)
    hist = np.zeros((s.lockout + 1, network.n_zones), dtype=np.int64)
    cp = RtuRating().code_power()
    power = np.zeros(STEPS_PER_DAY)
    for g in range(pre + STEPS_PER_DAY):
        codes = greedy.step(state.theta, bool(sched.occupied[g]), hist, sched.upper[g])
        state = plant_step(network, state, codes, trace.oat[g], trace.ghi[g])
        hist = np.vstack([hist[1:], codes])
        if g >= pre:
            power[g - pre] = cp[codes].sum()
    return power


def load_controller_model(scenario: Scenario, model: Any = None):
    if scenario.controller == "greedy":
        return None
    if model is None:
        if scenario.model_path is None:
            raise FileNotFoundError(f"{scenario.controller} controller needs model weights")
        from .models import load_model

        model = load_model(scenario.model_path)
    kind = getattr(model, "kind", None)
    want = "icrnn" if scenario.controller == "convex" else "arx"
    if kind != want:
        raise ValueError(f"{scenario.controller} controller expects a {want} model, got {kind}")
    return model


def run(scenario: Scenario, model: Any = None, sample_rounds: float = 0.0, sample_seed: int = 0) -> RunResult:
    """Simulate one scenario in closed loop.

    ``sample_rounds`` > 0 keeps that fraction of the scored MPC rounds (with
    their warm starts) for later re-solving, as used by :func:`budget_study`.
    """
    s = scenario
    model = load_controller_model(s, model)
    world = _World(s)
    nz, T, rho, dt = world.nz, s.horizon, s.lockout, DT_HOURS
    rating = RtuRating()
    cp = rating.code_power()
    budget = solver.Budget(s.budget_evals, s.budget_seconds, s.solver_seed)
    greedy = control.GreedyController(s.deadband, s.reentry, rho)
    rng_noise = np.random.default_rng(s.noise_seed)
    n_sample = int(round(sample_rounds * s.n_steps))
    sample_at = set((s.preroll + np.random.default_rng(sample_seed).choice(s.n_steps, n_sample, replace=False)).tolist())
    book = None
    if s.program == "bidding":
        book = market.BidBook(market.IsoModel(s.p_clear, s.p_call, s.iso_seed), dt=dt)
        for g in range(s.preroll - market.GATE_LEAD, s.preroll):
            book.close_gate(g)
    cfg = None
    if model is not None:
        cfg = control.MpcConfig(nz, model, world.schedule, world.tariff, T, dt, rho, rating)

    state = PlantState.uniform(nz, s.initial_temp, world.t0)
    n = world.n
    codes_log = np.zeros((n, nz), dtype=np.int64)
    theta_log = np.zeros((n, nz))
    dtheta_log = np.zeros((n, nz))
    hist = np.zeros((rho + 1, nz), dtype=np.int64)
    logs: list[RoundLog] = []
    sampled = []
    plan = None
    start_hist = None
    for g in range(n):
        scored = g >= s.preroll
        if g == s.preroll:
            start_hist = hist.copy()
        occupied = bool(world.schedule.occupied[g])
        upper_now = world.schedule.upper[g]
        res = None
        guard_l = guard_d = False
        if book is not None and scored:
            book.advance(g)
        if not scored or cfg is None:
            codes = greedy.step(state.theta, occupied, hist, upper_now)
        else:
            rs = _round_state(world, g, state.theta, codes_log, dtheta_log, hist, rng_noise)
            inst = _build(s, cfg, world, rs, book, g, rng_noise)
            warm = (np.repeat(hist[-1:], T, axis=0).reshape(-1) if plan is None
                    else solver.warm_start(plan.plan, nz).reshape(-1))
            if g in sample_at:
                sampled.append((g, inst, warm.copy()))
            res = control.solve_mpc(inst, budget, warm)
            plan = res
            codes = res.first.copy()
            guarded = control.lockout_guard(codes, hist, rho)
            guard_l = bool(np.any(guarded != codes))
            codes = guarded
            bid = book.called(g) if book is not None else None
            if bid is not None:
                guarded = control.delivery_guard(codes, bid.quantity, world.baseline[g], rating,
                                                 state.theta, upper_now)
                guard_d = bool(np.any(guarded != codes))
                codes = guarded
        codes = np.asarray(codes, dtype=np.int64)
        for c in codes:
            if not 0 <= c < len(LADDER):
                raise InvariantViolation(f"code {c} is off the ladder")
        new = plant_step(world.network, state, codes, world.weather.oat[g], world.weather.ghi[g],
                         occupied=occupied)
        codes_log[g] = codes
        theta_log[g] = new.theta
        dtheta_log[g] = new.theta - state.theta
        state = new
        hist = np.vstack([hist[1:], codes])
        if not scored:
            continue
        p = float(cp[codes].sum())
        price = float(world.tariff.energy_price[g])
        log = RoundLog(
            step=g,
            timestamp=world.weather.timestamps[g].isoformat(),
            codes=[int(c) for c in codes],
            theta=[float(v) for v in new.theta],
            lower=[float(v) for v in world.schedule.lower[g]],
            upper=[float(v) for v in upper_now],
            power_kw=p,
            energy_kwh=p * dt,
            energy_price=price,
            energy_cost=price * p * dt,
            baseline_kw=float(world.baseline[g]),
            cpr_event=bool(world.event[g]),
            guard_lockout=guard_l,
            guard_delivery=guard_d,
        )
        if log.cpr_event:
            log.curtailment_kwh = (log.baseline_kw - p) * dt
        if res is not None:
            log.objective, log.violation, log.evals = res.objective, res.violation, res.evals
        if book is not None:
            st = book.settle(g, p, world.baseline[g])
            if st is not None:
                log.reward = st.reward
                log.called = bool(book.bids[g].called)
            interval = g + market.GATE_LEAD
            q = 0.0
            if res is not None and not s.benchmark and interval < n:
                q = control.extract_bids(res.power, world.baseline[g:g + T])
            book.close_gate(g, q, float(world.tariff.curtailment_price[interval]) if q > 0 else 0.0)
            log.bid_kw = q
        logs.append(log)

    summary = metrics(logs, s, start_hist, book)
    return RunResult(summary, logs, book, start_hist, sampled)


def _round_state(world: _World, g: int, theta: np.ndarray, codes_log: np.ndarray, dtheta_log: np.ndarray,
                 hist: np.ndarray, rng: np.random.Generator) -> control.RoundState:
    s = world.s
    T = s.horizon
    w = min(g, s.preroll)
    fut = world.exo[g:g + T].copy()
    fut[:, 0] = inject_noise(fut[:, 0], world.noise.oat, rng, s.noise)
    fut[:, 1] = np.clip(inject_noise(fut[:, 1], world.noise.ghi, rng, s.noise), 0.0, None)
    price = None
    if world.prices is not None:
        price = np.clip(inject_noise(world.tariff.energy_price[g:g + T], world.noise.energy_price, rng, s.noise),
                        0.0, None)
    return control.RoundState(
        t=g,
        theta=theta.copy(),
        past_exo=world.exo[g - w:g],
        past_codes=codes_log[g - w:g],
        past_dtheta=dtheta_log[g - w:g],
        applied=hist.copy(),
        forecast=fut,
        energy_price=price,
    )


def _build(s: Scenario, cfg: control.MpcConfig, world: _World, rs: control.RoundState,
           book: market.BidBook | None, g: int, rng: np.random.Generator) -> control.MpcInstance:
    T = s.horizon
    if s.program in ("flat", "tou"):
        return control.build_base(cfg, rs)
    if s.program == "cpr":
        return control.build_cpr(cfg, rs, world.baseline[g:g + T], world.event[g:g + T], s.cpr_reward)
    mcp = world.tariff.curtailment_price[g:g + T]
    mcp = np.clip(inject_noise(mcp, world.noise.mcp, rng, s.noise and not s.benchmark), 0.0, None)
    return control.build_bidding(cfg, rs, book.view(g, T), mcp, world.baseline[g:g + T])


def check_invariants(result: RunResult, scenario: Scenario) -> list[str]:
    """Problems found in a finished run; empty when all invariants hold."""
    problems = []
    sm = result.summary
    if sm.toggling:
        problems.append(f"{sm.toggling} lock-out violations")
    if sm.undelivered:
        problems.append(f"{sm.undelivered} called bids not delivered")
    recomputed = sum(r.energy_cost for r in result.logs) - sum(r.reward for r in result.logs)
    if scenario.program == "cpr":
        recomputed -= cpr_reward(result.logs, scenario.cpr_reward)
    if recomputed != sm.net_cost:
        problems.append("net cost does not close against the round logs")
    if result.book is not None:
        paid = sum(b.mcp * b.quantity * result.book.dt for _, b in sorted(result.book.bids.items()) if b.called)
        if paid != sm.market_rewards:
            problems.append("market rewards differ from called-bid settlement")
    return problems


def run_with_benchmark(scenario: Scenario, model: Any = None) -> tuple[RunResult, RunResult | None]:
    """Run a scenario and, for bidding, its λ_- = 0 benchmark; fills ``savings_pct``."""
    res = run(scenario, model)
    if scenario.program != "bidding" or scenario.benchmark:
        return res, None
    bench = run(replace(scenario, benchmark=True, name=scenario.name + "-benchmark"), model)
    base = bench.summary.net_cost
    if base != 0:
        res.summary.savings_pct = 100.0 * (base - res.summary.net_cost) / abs(base)
    return res, bench


# ---------------------------------------------------------------------------
# Budget study
# ---------------------------------------------------------------------------


@dataclass
class BudgetStudy:
    budgets: list[int]
    rounds: list[int]
    objectives: np.ndarray  # (n_rounds, n_budgets)
    violations: np.ndarray
    identical: list[float]  # fraction identical vs the first budget, per later budget
    gaps: list[np.ndarray]  # |Δf| vs the first budget
    monotone: bool

    def to_json(self) -> dict:
        return {
            "budgets": self.budgets,
            "rounds": self.rounds,
            "objectives": self.objectives.tolist(),
            "violations": self.violations.tolist(),
            "identical_fraction": self.identical,
            "abs_gap_mean": [float(g.mean()) if g.size else 0.0 for g in self.gaps],
            "abs_gap_max": [float(g.max()) if g.size else 0.0 for g in self.gaps],
            "monotone": self.monotone,
        }


def budget_study(scenario: Scenario, budgets: list[int], fraction: float = 0.3, model: Any = None,
                 seed: int = 0) -> BudgetStudy:
    """Re-solve a sample of rounds under increasing evaluation budgets.

    Each sampled instance is solved from its recorded warm start under
    every budget.  Results are compared in barrier order (feasible by
    objective, then infeasible by violation).
    """
    if list(budgets) != sorted(budgets) or len(budgets) < 2:
        raise ValueError("budgets must be increasing")
    res = run(replace(scenario, budget_evals=budgets[0]), model, sample_rounds=fraction, sample_seed=seed)
    objs, viol, points, ranks = [], [], [], []
    for _, inst, warm in res.sampled:
        row_o, row_v, row_p, row_r = [], [], [], []
        for b in budgets:
            r = solver.solve(inst.problem(), warm, solver.Budget(b, None, scenario.solver_seed))
            row_o.append(r.f)
            row_v.append(r.h)
            row_p.append(r.point)
            row_r.append(solver.result_rank(r))
        objs.append(row_o)
        viol.append(row_v)
        points.append(row_p)
        ranks.append(row_r)
    n = len(points)
    identical, gaps = [], []
    monotone = True
    for j in range(1, len(budgets)):
        same = [np.array_equal(p[0], p[j]) for p in points]
        identical.append(float(np.mean(same)) if n else 1.0)
        gaps.append(np.array([abs(o[j] - o[0]) for o in objs]))
        monotone &= all(r[j] <= r[j - 1] for r in ranks)
    return BudgetStudy(list(budgets), [g for g, _, _ in res.sampled], np.array(objs).reshape(n, len(budgets)),
                       np.array(viol).reshape(n, len(budgets)), identical, gaps, bool(monotone))
