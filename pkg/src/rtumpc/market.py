"""Real-time reserve market and ISO simulator.

A bid for delivery interval ``j`` is submitted at gate closure ``j - 3``,
cleared or rejected one interval later, called or not called one interval
after that, and settled once interval ``j`` has elapsed.  Clearing and
dispatch are independent Bernoulli draws (price-taker participant).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import DT_HOURS, STEPS_PER_DAY

GATE_LEAD = 3  # intervals between gate closure and delivery (15 min)


class OutOfOrder(RuntimeError):
    pass


class IllegalTransition(RuntimeError):
    pass


class NoHistory(ValueError):
    pass


class BidStatus(str, Enum):
    SUBMITTED = "submitted"
    CLEARED = "cleared"
    REJECTED = "rejected"
    CALLED = "called"
    NOT_CALLED = "not_called"
    SETTLED_PAID = "settled_paid"


_NEXT = {
    BidStatus.SUBMITTED: {BidStatus.CLEARED, BidStatus.REJECTED},
    BidStatus.CLEARED: {BidStatus.CALLED, BidStatus.NOT_CALLED},
    BidStatus.CALLED: {BidStatus.SETTLED_PAID},
    BidStatus.NOT_CALLED: {BidStatus.SETTLED_PAID},
    BidStatus.REJECTED: set(),
    BidStatus.SETTLED_PAID: set(),
}


@dataclass
class Bid:
    """Curtailment offer of ``quantity`` kW for one delivery interval."""

    interval: int
    quantity: float
    mcp: float
    submitted_at: int
    status: BidStatus = BidStatus.SUBMITTED
    called: bool | None = None
    reward: float = 0.0
    delivered: bool | None = None
    log: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.quantity <= 0:
            raise ValueError("bid quantity must be positive")
        if self.mcp < 0:
            raise ValueError("clearing price must be nonnegative")
        if not self.log:
            self.log.append((self.submitted_at, self.status.value))

    def move(self, status: BidStatus, t: int) -> None:
        if status not in _NEXT[self.status]:
            raise IllegalTransition(f"{self.status.value} -> {status.value}")
        self.status = status
        if status is BidStatus.CALLED:
            self.called = True
        elif status is BidStatus.NOT_CALLED:
            self.called = False
        self.log.append((t, status.value))

    def to_json(self) -> dict:
        return {
            "interval": self.interval,
            "quantity_kw": self.quantity,
            "mcp": self.mcp,
            "submitted_at": self.submitted_at,
            "status": self.status.value,
            "called": self.called,
            "reward": self.reward,
            "delivered": self.delivered,
            "log": [list(e) for e in self.log],
        }


def assumed_dispatch(bid: Bid | None) -> int:
    """Dispatch signal the controller plans with.

    Pending bids are assumed called until the ISO says otherwise; rejected
    and not-called bids (and intervals without a bid) carry no obligation.
    """
    if bid is None:
        return 0
    if bid.status in (BidStatus.SUBMITTED, BidStatus.CLEARED, BidStatus.CALLED):
        return 1
    if bid.status is BidStatus.SETTLED_PAID:
        return int(bool(bid.called))
    return 0


@dataclass(frozen=True)
class IsoModel:
    p_clear: float = 0.9
    p_call: float = 0.4
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_clear <= 1.0 and 0.0 <= self.p_call <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class MarketView:
    """Market state over a horizon ``t .. t+T-1`` as seen by the controller."""

    closed: np.ndarray  # bool (T,)
    quantity: np.ndarray  # kW (T,)
    sigma: np.ndarray  # assumed dispatch (T,)
    mcp: np.ndarray  # price attached to the closed bids (T,)


@dataclass(frozen=True)
class Settlement:
    interval: int
    reward: float
    delivered: bool | None
    curtailment: float


class BidBook:
    """Bid lifecycle and closed-interval bookkeeping for one participant."""

    def __init__(self, iso: IsoModel = IsoModel(), lead: int = GATE_LEAD, dt: float = DT_HOURS):
        self.iso = iso
        self.lead = lead
        self.dt = dt
        self.rng = np.random.default_rng(iso.seed)
        self.bids: dict[int, Bid] = {}
        self.closed: set[int] = set()
        self.t: int | None = None

    def close_gate(self, t: int, quantity: float = 0.0, mcp: float = 0.0) -> Bid | None:
        """Close interval ``t + lead``, submitting a bid when ``quantity > 0``."""
        interval = t + self.lead
        if interval in self.closed:
            raise OutOfOrder(f"interval {interval} already closed")
        self.closed.add(interval)
        if quantity <= 0:
            return None
        bid = Bid(interval=interval, quantity=float(quantity), mcp=float(mcp), submitted_at=t)
        self.bids[interval] = bid
        return bid

    def advance(self, t: int) -> list[tuple[int, int, str]]:
        """Run the ISO clearing and dispatch draws due at interval ``t``."""
        if self.t is not None and t <= self.t:
            raise OutOfOrder(f"market at {self.t}, asked to advance to {t}")
        self.t = t
        events = []
        for interval in sorted(self.bids):
            bid = self.bids[interval]
            if bid.status is BidStatus.SUBMITTED and t >= bid.submitted_at + 1:
                ok = self.rng.random() < self.iso.p_clear
                bid.move(BidStatus.CLEARED if ok else BidStatus.REJECTED, t)
                events.append((t, interval, bid.status.value))
            if bid.status is BidStatus.CLEARED and t >= bid.submitted_at + 2:
                ok = self.rng.random() < self.iso.p_call
                bid.move(BidStatus.CALLED if ok else BidStatus.NOT_CALLED, t)
                events.append((t, interval, bid.status.value))
        return events

    def view(self, t: int, horizon: int) -> MarketView:
        ks = range(t, t + horizon)
        closed = np.array([k in self.closed for k in ks])
        bids = [self.bids.get(k) for k in ks]
        return MarketView(
            closed=closed,
            quantity=np.array([b.quantity if b else 0.0 for b in bids]),
            sigma=np.array([assumed_dispatch(b) for b in bids], dtype=float),
            mcp=np.array([b.mcp if b else 0.0 for b in bids]),
        )

    def called(self, interval: int) -> Bid | None:
        """The bid for ``interval`` when the ISO has called it."""
        bid = self.bids.get(interval)
        return bid if bid is not None and bid.called else None

    def settle(self, interval: int, realized_power: float, baseline_power: float,
               tol: float = 1e-9) -> Settlement | None:
        """Settle the bid of an elapsed interval.

        Called bids earn ``mcp * quantity * dt``; the delivery flag is false
        when the realized curtailment falls short of the bid quantity.
        """
        bid = self.bids.get(interval)
        if bid is None:
            return None
        if self.t is not None and interval > self.t:
            raise OutOfOrder(f"interval {interval} has not elapsed")
        curtail = float(baseline_power - realized_power)
        if bid.status is BidStatus.CALLED:
            bid.reward = bid.mcp * bid.quantity * self.dt
            bid.delivered = curtail >= bid.quantity - tol
        elif bid.status is BidStatus.NOT_CALLED:
            bid.reward = 0.0
        else:
            return Settlement(interval, 0.0, None, curtail)
        bid.move(BidStatus.SETTLED_PAID, interval)
        return Settlement(interval, bid.reward, bid.delivered, curtail)

    def total_rewards(self) -> float:
        return float(sum(b.reward for _, b in sorted(self.bids.items())))

    def export_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for _, bid in sorted(self.bids.items()):
                fh.write(json.dumps(bid.to_json(), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Baseline:
    """Expected HVAC power per 5-min interval of one weekday."""

    dow: int
    power: np.ndarray  # (288,)

    def window(self, step_of_day: int, length: int) -> np.ndarray:
        idx = (np.arange(step_of_day, step_of_day + length)) % self.power.size
        return self.power[idx]

    def to_json(self) -> dict:
        return {"dow": self.dow, "power_kw": self.power.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "Baseline":
        return cls(int(data["dow"]), np.asarray(data["power_kw"], dtype=float))


def compute_baseline(history: Iterable[tuple[date, Sequence[float]]], dow: int) -> Baseline:
    """Pointwise mean of the daily power profiles recorded on weekday ``dow``."""
    days = [np.asarray(p, dtype=float) for d, p in history if d.weekday() == dow]
    if not days:
        raise NoHistory(f"no history for weekday {dow}")
    if any(p.shape != (STEPS_PER_DAY,) for p in days):
        raise ValueError(f"daily profiles must have {STEPS_PER_DAY} intervals")
    return Baseline(dow, np.mean(days, axis=0))


# ---------------------------------------------------------------------------
# Price traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriceConfig:
    energy_mean: float = 0.03  # $/kWh
    mcp_mean: float = 0.06  # $/kWh
    energy_sigma: float = 0.25
    mcp_sigma: float = 0.35


@dataclass(frozen=True)
class MarketTrace:
    timestamps: tuple[datetime, ...]
    energy_price: np.ndarray
    mcp: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.energy_price < 0) or np.any(self.mcp < 0):
            raise ValueError("prices must be nonnegative")
        if not (len(self.timestamps) == self.energy_price.size == self.mcp.size):
            raise ValueError("price series lengths differ")

    def __len__(self) -> int:
        return self.energy_price.size

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["timestamp", "energy_price", "mcp"])
            for ts, e, m in zip(self.timestamps, self.energy_price, self.mcp):
                w.writerow([ts.isoformat(), repr(float(e)), repr(float(m))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "MarketTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(
            timestamps=tuple(datetime.fromisoformat(r["timestamp"]) for r in rows),
            energy_price=np.array([float(r["energy_price"]) for r in rows]),
            mcp=np.array([float(r["mcp"]) for r in rows]),
        )


def _diurnal(hours: np.ndarray, peak: float, depth: float) -> np.ndarray:
    shape = 1.0 + depth * np.cos(2 * np.pi * (hours - peak) / 24.0)
    return shape / shape.mean()


def synthesize_prices(seed: int, days: int, start: datetime,
                      config: PriceConfig = PriceConfig(), dt: float = DT_HOURS) -> MarketTrace:
    """Lognormal prices scattered around afternoon-peaking diurnal shapes.

    The multiplicative noise has unit mean, so each series averages to its
    configured mean up to sampling error.
    """
    rng = np.random.default_rng(seed)
    n = int(round(days * 24 / dt))
    hours = (np.arange(n) * dt) % 24.0
    ts = tuple(start + timedelta(hours=float(i * dt)) for i in range(n))

    def lognormal(sigma: float) -> np.ndarray:
        return np.exp(sigma * rng.standard_normal(n) - 0.5 * sigma**2)

    day_len = int(round(24 / dt))
    e_shape = _diurnal(hours[:day_len], 17.0, 0.35)
    m_shape = _diurnal(hours[:day_len], 15.0, 0.5)
    energy = config.energy_mean * np.resize(e_shape, n) * lognormal(config.energy_sigma)
    mcp = config.mcp_mean * np.resize(m_shape, n) * lognormal(config.mcp_sigma)
    return MarketTrace(ts, energy, mcp)
