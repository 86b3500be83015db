"""MPC problem builders and the thermostat benchmark.

Every builder returns an :class:`MpcInstance` over ``n_z * T`` integer
ladder codes, stored time-major (index ``k * n_z + z``).  Objectives and
constraints are evaluated in batches through the thermal model's rollout,
so the same pipeline also accepts fractional stage bits for relaxation
probes.

Constraint layout per instance: comfort upper bounds ``(T, n_z)``, then
lock-out ``(T, n_z, 3)``, then one delivery row per closed interval with an
assumed dispatch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import solver
from .core import (
    DT_HOURS,
    LADDER,
    N_CODES,
    OCCUPIED_BOUNDS,
    UNOCCUPIED_BOUNDS,
    ComfortSchedule,
    RtuRating,
    Tariff,
)
from .market import GATE_LEAD, MarketView

CPR_BASE_RATE = 0.076  # $/kWh
CPR_REWARD = 0.55  # $/kWh


class InsufficientHistory(ValueError):
    pass


class MissingBaseline(ValueError):
    pass


@dataclass(frozen=True)
class MpcConfig:
    n_zones: int
    model: Any
    schedule: ComfortSchedule
    tariff: Tariff
    horizon: int = 24
    dt: float = DT_HOURS
    lockout: int = 3
    rating: RtuRating = RtuRating()

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least one step")
        if not 0 <= self.lockout < self.horizon:
            raise ValueError("lock-out must satisfy 0 <= rho < T")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class RoundState:
    """What the controller knows at the start of round ``t``.

    ``theta`` is the latest measurement ``θ^{t-1}``; the ``past_*`` arrays
    end at step ``t-1``; ``applied`` holds the last ``ρ+1`` applied codes
    (oldest first); ``forecast`` is the exogenous state for ``t .. t+T-1``.
    ``energy_price`` optionally overrides the tariff window (e.g. a noisy
    real-time price forecast).
    """

    t: int
    theta: np.ndarray
    past_exo: np.ndarray
    past_codes: np.ndarray
    past_dtheta: np.ndarray
    applied: np.ndarray
    forecast: np.ndarray
    energy_price: np.ndarray | None = None


def lockout_terms(history_bits: np.ndarray, plan_bits: np.ndarray, rho: int) -> np.ndarray:
    """Lock-out constraint values ``g`` for every planned step and component.

    ``g^k = Σ_{τ=k-ρ}^{k-1} max(u^{τ-1} - u^τ, 0) - (1 - u^k)``, so a
    component that switched off within the last ``ρ`` steps must stay off.

    Parameters
    ----------
    history_bits : (ρ+1, nz, 3) applied stage bits before the plan, oldest first.
    plan_bits : (B, T, nz, 3) planned stage bits (may be fractional).
    """
    B = plan_bits.shape[0]
    hist = np.broadcast_to(history_bits[-(rho + 1):], (B,) + history_bits[-(rho + 1):].shape)
    seq = np.concatenate([hist, plan_bits], axis=1)
    off = np.maximum(seq[:, :-1] - seq[:, 1:], 0.0)  # switch-off at t-ρ+j
    S = np.concatenate([np.zeros_like(off[:, :1]), np.cumsum(off, axis=1)], axis=1)
    T = plan_bits.shape[1]
    window = S[:, rho:rho + T] - S[:, 0:T]
    return window - (1.0 - plan_bits)


def count_toggling(codes: np.ndarray, rho: int, history: np.ndarray | None = None) -> int:
    """Lock-out violations (component-steps) in an applied code sequence ``(N, nz)``."""
    codes = np.asarray(codes, dtype=np.intp)
    if history is None:
        history = np.repeat(codes[:1], rho + 1, axis=0)
    g = lockout_terms(LADDER[np.asarray(history, dtype=np.intp)].astype(float),
                      LADDER[codes][None].astype(float), rho)
    return int(np.sum(g > 1e-9))


def locked_components(history: np.ndarray, rho: int) -> np.ndarray:
    """Components ``(nz, 3)`` that may not switch on at the next step."""
    bits = LADDER[np.asarray(history, dtype=np.intp)].astype(float)[-(rho + 1):]
    off = np.maximum(bits[:-1] - bits[1:], 0.0)
    return off.sum(axis=0) > 0


def highest_allowed(locked: np.ndarray) -> np.ndarray:
    """Largest ladder code per zone that keeps every locked component off."""
    ok = ~np.any(LADDER[None, :, :].astype(bool) & locked[:, None, :], axis=-1)  # (nz, 4)
    return np.array([max(c for c in range(N_CODES) if row[c]) for row in ok])


class MpcInstance:
    """One round's optimization problem over integer ladder codes."""

    def __init__(self, config: MpcConfig, state: RoundState, *, energy_price: np.ndarray,
                 demand_charge: float = 0.0, baseline: np.ndarray | None = None,
                 curtail_weight: np.ndarray | None = None, delivery: np.ndarray | None = None,
                 constant: float = 0.0):
        model = config.model
        T, nz = config.horizon, config.n_zones
        w = getattr(getattr(model, "params", None), "window", None)
        need = max(int(w) if w else 0, 4)
        if len(state.past_exo) < need or len(state.past_codes) < need or len(state.past_dtheta) < need:
            raise InsufficientHistory(f"controller needs {need} past steps")
        if len(state.applied) < config.lockout + 1:
            raise InsufficientHistory(f"lock-out needs {config.lockout + 1} applied steps")
        if state.forecast.shape[0] < T:
            raise ValueError("forecast shorter than the horizon")
        self.config = config
        self.state = state
        self.T, self.nz = T, nz
        self.theta0 = np.asarray(state.theta, dtype=float)
        self.upper = config.schedule.window(state.t, T).upper
        self.fut_exo = np.asarray(state.forecast[:T], dtype=float)
        self.ctx = model.context(state.past_exo[-need:], state.past_codes[-need:], state.past_dtheta[-need:])
        self.hist_bits = LADDER[np.asarray(state.applied, dtype=np.intp)].astype(float)
        self.p = np.array([config.rating.p_c2, config.rating.p_c1, config.rating.p_f])
        self.energy_price = np.asarray(energy_price, dtype=float)
        self.demand_charge = float(demand_charge)
        self.baseline = None if baseline is None else np.asarray(baseline, dtype=float)
        self.curtail_weight = None if curtail_weight is None else np.asarray(curtail_weight, dtype=float)
        # delivery[k] = committed kW at step k (nan where no obligation)
        self.delivery = None if delivery is None else np.asarray(delivery, dtype=float)
        self._deliv_idx = (np.flatnonzero(~np.isnan(self.delivery)) if self.delivery is not None
                           else np.zeros(0, dtype=int))
        self.constant = float(constant)

    @property
    def dim(self) -> int:
        return self.T * self.nz

    def problem(self) -> solver.BoxedIntProblem:
        return solver.BoxedIntProblem(np.zeros(self.dim, dtype=np.int64),
                                      np.full(self.dim, N_CODES - 1, dtype=np.int64), self.evaluate)

    def bits(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.intp).reshape(-1, self.T, self.nz)
        return LADDER[X].astype(float)

    def evaluate(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Objective ``(B,)`` and constraints ``(B, m)`` for integer plans ``(B, n_z T)``."""
        return self.evaluate_bits(self.bits(X))

    def evaluate_bits(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        F, G, _ = self._pipeline(U)
        return F, G

    def _pipeline(self, U: np.ndarray):
        U = np.asarray(U, dtype=float)
        B = U.shape[0]
        P = U @ self.p  # (B, T, nz)
        P = P.sum(axis=-1)  # (B, T)
        dt = self.config.dt
        F = (P * dt) @ self.energy_price + self.demand_charge * P.max(axis=1) - self.constant
        if self.curtail_weight is not None:
            F = F - ((self.baseline - P) * dt) @ self.curtail_weight
        dtheta = self.config.model.rollout(self.ctx, self.fut_exo, U)
        theta = self.theta0 + np.cumsum(dtheta, axis=1)
        comfort = (theta - self.upper).reshape(B, -1)
        lock = lockout_terms(self.hist_bits, U, self.config.lockout).reshape(B, -1)
        parts = [comfort, lock]
        if self._deliv_idx.size:
            k = self._deliv_idx
            parts.append(self.delivery[k] - (self.baseline[k] - P[:, k]))
        G = np.concatenate(parts, axis=1)
        return F, G, (P, theta)

    def details(self, x: np.ndarray) -> dict:
        U = self.bits(np.asarray(x)[None])
        F, G, (P, theta) = self._pipeline(U)
        return {
            "f": float(F[0]),
            "h": float(solver.violation(G[0])),
            "power": P[0],
            "energy": P[0] * self.config.dt,
            "theta": theta[0],
        }


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _prices(config: MpcConfig, state: RoundState) -> np.ndarray:
    if state.energy_price is not None:
        return np.asarray(state.energy_price[:config.horizon], dtype=float)
    return config.tariff.energy_window(state.t, config.horizon)


def build_base(config: MpcConfig, state: RoundState) -> MpcInstance:
    """Energy plus horizon-peak demand cost under comfort and lock-out constraints."""
    return MpcInstance(config, state, energy_price=_prices(config, state),
                       demand_charge=config.tariff.demand_charge)


def build_bidding(config: MpcConfig, state: RoundState, view: MarketView,
                  mcp_forecast: np.ndarray, baseline: np.ndarray | None) -> MpcInstance:
    """Energy cost minus curtailment value on open intervals and rewards on closed ones.

    Open intervals trade every kWh below (above) the baseline at the
    forecast clearing price; closed intervals with an assumed dispatch carry
    the committed quantity as a hard delivery constraint.
    """
    T = config.horizon
    if baseline is None or len(baseline) < T:
        raise MissingBaseline("baseline must cover the horizon")
    baseline = np.asarray(baseline[:T], dtype=float)
    closed = np.asarray(view.closed[:T], dtype=bool)
    sigma = np.asarray(view.sigma[:T], dtype=float)
    weight = np.where(closed, 0.0, np.asarray(mcp_forecast[:T], dtype=float))
    reward = float(np.sum(np.where(closed, view.mcp[:T] * view.quantity[:T] * sigma, 0.0)) * config.dt)
    delivery = np.where(closed & (sigma > 0) & (view.quantity[:T] > 0), view.quantity[:T], np.nan)
    return MpcInstance(config, state, energy_price=_prices(config, state), baseline=baseline,
                       curtail_weight=weight, delivery=delivery, constant=reward)


def build_cpr(config: MpcConfig, state: RoundState, baseline: np.ndarray | None,
              event: np.ndarray, reward: float = CPR_REWARD) -> MpcInstance:
    """Energy cost minus the rebate on curtailment below baseline inside the event."""
    T = config.horizon
    event = np.asarray(event[:T], dtype=bool)
    if event.any() and (baseline is None or len(baseline) < T):
        raise MissingBaseline("baseline must cover the horizon")
    base = np.zeros(T) if baseline is None else np.asarray(baseline[:T], dtype=float)
    return MpcInstance(config, state, energy_price=_prices(config, state), baseline=base,
                       curtail_weight=np.where(event, reward, 0.0))


def extract_bids(power: np.ndarray, baseline: np.ndarray, lead: int = GATE_LEAD) -> float:
    """Bid quantity (kW) for the interval ``lead`` steps ahead; 0 means no bid."""
    return float(max(0.0, baseline[lead] - power[lead]))


# ---------------------------------------------------------------------------
# Solving and apply-time guards
# ---------------------------------------------------------------------------


@dataclass
class PlanResult:
    plan: np.ndarray  # (T, nz) codes
    theta: np.ndarray  # (T, nz) predicted
    energy: np.ndarray  # (T,) kWh
    power: np.ndarray  # (T,) kW
    objective: float
    violation: float
    evals: int

    @property
    def first(self) -> np.ndarray:
        return self.plan[0]


def solve_mpc(instance: MpcInstance, budget: solver.Budget = solver.Budget(),
              warm: np.ndarray | None = None) -> PlanResult:
    start = np.zeros(instance.dim, dtype=np.int64) if warm is None else np.asarray(warm, dtype=np.int64).reshape(-1)
    res = solver.solve(instance.problem(), start, budget)
    d = instance.details(res.point)
    return PlanResult(
        plan=res.point.reshape(instance.T, instance.nz).copy(),
        theta=d["theta"],
        energy=d["energy"],
        power=d["power"],
        objective=d["f"],
        violation=d["h"],
        evals=res.evals,
    )


def lockout_guard(codes: np.ndarray, history: np.ndarray, rho: int) -> np.ndarray:
    """Lower any code that would switch on a locked component."""
    cap = highest_allowed(locked_components(history, rho))
    return np.minimum(np.asarray(codes, dtype=np.int64), cap)


def delivery_guard(codes: np.ndarray, committed: float, baseline: float, rating: RtuRating,
                   theta: np.ndarray, upper: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Step codes down until ``baseline - power >= committed``.

    Each step lowers the zone with the most comfort slack (largest
    ``upper - θ``) among those still running.
    """
    codes = np.array(codes, dtype=np.int64)
    cp = rating.code_power()
    slack = np.asarray(upper, dtype=float) - np.asarray(theta, dtype=float)
    while baseline - cp[codes].sum() < committed - tol and codes.any():
        running = np.flatnonzero(codes > 0)
        z = running[np.argmax(slack[running])]
        codes[z] -= 1
    return codes


# ---------------------------------------------------------------------------
# Thermostat benchmark
# ---------------------------------------------------------------------------


def greedy_step(theta: np.ndarray, occupied: bool, previous: np.ndarray, deadband: float = 0.0,
                reentry: float = 1.0, history: np.ndarray | None = None, rho: int = 3,
                upper: np.ndarray | None = None) -> np.ndarray:
    """One decision of a staged thermostat.

    Each zone climbs one rung (off, fan, stage 1, stage 2) per step while
    ``θ > θ̄ - deadband`` and drops one rung per step once ``θ < θ̄ - reentry``;
    in between it holds.  Rungs that would restart a locked component are
    skipped by holding instead.
    """
    theta = np.asarray(theta, dtype=float)
    prev = np.asarray(previous, dtype=np.int64)
    if upper is None:
        upper = np.full(theta.shape, (OCCUPIED_BOUNDS if occupied else UNOCCUPIED_BOUNDS)[1])
    up = theta > upper - deadband
    down = theta < upper - reentry
    codes = np.where(up, np.minimum(prev + 1, N_CODES - 1), np.where(down, np.maximum(prev - 1, 0), prev))
    if history is not None:
        codes = np.where(codes > prev, np.maximum(prev, lockout_guard(codes, history, rho)), codes)
    return codes.astype(np.int64)


@dataclass(frozen=True)
class GreedyController:
    deadband: float = 0.0
    reentry: float = 1.0
    lockout: int = 3

    def step(self, theta: np.ndarray, occupied: bool, history: np.ndarray,
             upper: np.ndarray | None = None) -> np.ndarray:
        return greedy_step(theta, occupied, history[-1], self.deadband, self.reentry,
                           history=history, rho=self.lockout, upper=upper)


__all__ = [
    "CPR_BASE_RATE", "CPR_REWARD", "GreedyController", "InsufficientHistory", "MissingBaseline",
    "MpcConfig", "MpcInstance", "PlanResult", "RoundState", "build_base",
    "build_bidding", "build_cpr", "count_toggling", "delivery_guard", "extract_bids", "greedy_step",
    "highest_allowed", "locked_components", "lockout_guard", "lockout_terms", "solve_mpc",
]
