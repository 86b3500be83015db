"""Domain types shared across the toolkit.

Controls are handled in two equivalent forms: the per-RTU stage vector
``[u_c2, u_c1, u_f]`` and the integer ladder code 0..3 used by the solver
(0 = off, 1 = fan, 2 = stage 1 + fan, 3 = stage 2 + stage 1 + fan).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Iterable, Sequence

import numpy as np

N_COMPONENTS = 3
N_CODES = 4

# row i is the stage vector [c2, c1, fan] of code i
LADDER = np.array(
    [
        [0, 0, 0],
        [0, 0, 1],
        [0, 1, 1],
        [1, 1, 1],
    ],
    dtype=np.int8,
)

DT_HOURS = 1.0 / 12.0
STEPS_PER_DAY = 288


class InvalidLadder(ValueError):
    """Raised when a stage vector is not one of the four valid RTU states."""


# ---------------------------------------------------------------------------
# Controls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlVector:
    """On/off stages of one RTU, ordered ``(c2, c1, fan)``."""

    stages: tuple[int, int, int]

    def __post_init__(self) -> None:
        if len(self.stages) != N_COMPONENTS:
            raise InvalidLadder(f"expected {N_COMPONENTS} stages, got {len(self.stages)}")
        if code_of(self.stages) is None:
            raise InvalidLadder(f"{list(self.stages)} is not a valid RTU control")

    @property
    def code(self) -> int:
        return code_of(self.stages)  # type: ignore[return-value]

    @classmethod
    def from_code(cls, code: int) -> "ControlVector":
        if not 0 <= int(code) < N_CODES:
            raise InvalidLadder(f"code {code} outside 0..{N_CODES - 1}")
        return cls(tuple(int(v) for v in LADDER[int(code)]))  # type: ignore[arg-type]

    def to_json(self) -> list[int]:
        return list(self.stages)

    @classmethod
    def from_json(cls, data: Sequence[int]) -> "ControlVector":
        return validate_control(data)


def code_of(stages: Sequence[int]) -> int | None:
    """Ladder code of a stage vector, or None when it is not on the ladder."""
    s = tuple(int(v) for v in stages)
    for code, row in enumerate(LADDER):
        if s == tuple(int(v) for v in row):
            return code
    return None


def validate_control(raw: Sequence[int]) -> ControlVector:
    """Check a raw bit vector against the RTU ladder.

    Raises
    ------
    InvalidLadder
        If the vector does not have three entries, contains non-binary
        values, runs a cooling stage without the fan, or runs stage 2
        without stage 1.
    """
    if len(raw) != N_COMPONENTS:
        raise InvalidLadder(f"expected {N_COMPONENTS} stages, got {len(raw)}")
    bits = [int(v) for v in raw]
    if any(b not in (0, 1) for b in bits):
        raise InvalidLadder(f"non-binary stage values {list(raw)}")
    c2, c1, fan = bits
    if (c1 or c2) and not fan:
        raise InvalidLadder(f"cooling without fan: {bits}")
    if c2 and not c1:
        raise InvalidLadder(f"stage 2 without stage 1: {bits}")
    return ControlVector((c2, c1, fan))


def codes_to_stages(codes: np.ndarray) -> np.ndarray:
    """Map integer codes of any shape ``(...)`` to stage bits ``(..., 3)``."""
    return LADDER[np.asarray(codes, dtype=np.intp)]


def stages_to_codes(stages: np.ndarray) -> np.ndarray:
    """Inverse of :func:`codes_to_stages` for arrays already on the ladder."""
    stages = np.asarray(stages)
    # on the ladder the code equals the number of active components
    return stages.sum(axis=-1).astype(np.int64)


def extend(u: Iterable[ControlVector] | np.ndarray) -> np.ndarray:
    """Concatenate controls with their negation, ``[u, -u]``.

    Accepts a sequence of :class:`ControlVector` (one per zone), a flat
    bit vector, or a stage array shaped ``(..., n_zones, 3)``.
    """
    if isinstance(u, np.ndarray):
        flat = u.reshape(u.shape[:-2] + (-1,)) if u.ndim > 1 else u
        flat = np.asarray(flat, dtype=float)
    else:
        flat = np.array([b for cv in u for b in cv.stages], dtype=float)
    return np.concatenate([flat, -flat], axis=-1)


# ---------------------------------------------------------------------------
# Ratings and energy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RtuRating:
    """Electrical power draw per RTU component in kW."""

    p_c2: float = 2.272
    p_c1: float = 2.272
    p_f: float = 0.637

    def __post_init__(self) -> None:
        if min(self.p_c2, self.p_c1, self.p_f) <= 0:
            raise ValueError("component ratings must be positive")

    def vector(self, n_zones: int = 1) -> np.ndarray:
        """Concatenated rating vector ``p^c`` over ``n_zones`` RTUs."""
        return np.tile([self.p_c2, self.p_c1, self.p_f], n_zones).astype(float)

    def code_power(self) -> np.ndarray:
        """Electrical power of each ladder code for one RTU (kW)."""
        return LADDER @ np.array([self.p_c2, self.p_c1, self.p_f])

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "RtuRating":
        return cls(**data)


def power(u: Sequence[ControlVector] | np.ndarray, rating: RtuRating) -> float:
    """Instantaneous electrical power ``u^T p`` in kW."""
    if isinstance(u, np.ndarray):
        bits = u.reshape(-1).astype(float)
    else:
        bits = np.array([b for cv in u for b in cv.stages], dtype=float)
    n_zones = bits.size // N_COMPONENTS
    return float(bits @ rating.vector(n_zones))


def step_energy(u: Sequence[ControlVector] | np.ndarray, rating: RtuRating, dt: float = DT_HOURS) -> float:
    """Energy drawn over one control round, ``(u^T p) dt`` in kWh."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return power(u, rating) * dt


# ---------------------------------------------------------------------------
# Exogenous state, comfort, tariffs
# ---------------------------------------------------------------------------


def clock_features(ts: datetime) -> tuple[float, float, float, float]:
    """Sin/cos encodings of time of day and day of week."""
    minutes = ts.hour * 60 + ts.minute + ts.second / 60.0
    a_day = 2.0 * math.pi * minutes / 1440.0
    a_week = 2.0 * math.pi * (ts.weekday() + minutes / 1440.0) / 7.0
    return math.sin(a_day), math.cos(a_day), math.sin(a_week), math.cos(a_week)


@dataclass(frozen=True)
class ExogenousState:
    oat: float
    ghi: float
    tod_sin: float
    tod_cos: float
    dow_sin: float
    dow_cos: float

    def __post_init__(self) -> None:
        for s, c in ((self.tod_sin, self.tod_cos), (self.dow_sin, self.dow_cos)):
            if abs(s * s + c * c - 1.0) > 1e-9:
                raise ValueError("clock encoding is not on the unit circle")

    @classmethod
    def at(cls, ts: datetime, oat: float, ghi: float) -> "ExogenousState":
        return cls(oat, ghi, *clock_features(ts))

    def vector(self) -> np.ndarray:
        return np.array([self.oat, self.ghi, self.tod_sin, self.tod_cos, self.dow_sin, self.dow_cos])

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "ExogenousState":
        return cls(**data)


N_EXOGENOUS = 6

OCCUPIED_BOUNDS = (20.0, 24.0)
UNOCCUPIED_BOUNDS = (18.0, 28.0)


def is_occupied(ts: datetime, start_hour: int = 8, end_hour: int = 18) -> bool:
    return ts.weekday() < 5 and start_hour <= ts.hour < end_hour


@dataclass(frozen=True)
class ComfortSchedule:
    """Per-step comfort band for every zone.

    ``lower`` and ``upper`` have shape ``(n_steps, n_zones)``.
    """

    lower: np.ndarray
    upper: np.ndarray
    occupied: np.ndarray

    def __post_init__(self) -> None:
        if self.lower.shape != self.upper.shape:
            raise ValueError("bound arrays differ in shape")
        if np.any(self.lower >= self.upper):
            raise ValueError("lower comfort bound must stay below upper bound")

    @classmethod
    def from_timestamps(
        cls,
        timestamps: Sequence[datetime],
        n_zones: int,
        occupied_bounds: tuple[float, float] = OCCUPIED_BOUNDS,
        unoccupied_bounds: tuple[float, float] = UNOCCUPIED_BOUNDS,
    ) -> "ComfortSchedule":
        occ = np.array([is_occupied(ts) for ts in timestamps])
        lo = np.where(occ, occupied_bounds[0], unoccupied_bounds[0])
        hi = np.where(occ, occupied_bounds[1], unoccupied_bounds[1])
        return cls(
            lower=np.repeat(lo[:, None], n_zones, axis=1).astype(float),
            upper=np.repeat(hi[:, None], n_zones, axis=1).astype(float),
            occupied=occ,
        )

    def __len__(self) -> int:
        return self.lower.shape[0]

    def window(self, start: int, length: int) -> "ComfortSchedule":
        """Slice ``length`` steps from ``start``, repeating the last row past the end."""
        idx = np.minimum(np.arange(start, start + length), len(self) - 1)
        return ComfortSchedule(self.lower[idx], self.upper[idx], self.occupied[idx])

    def to_json(self) -> dict:
        return {
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "occupied": self.occupied.astype(bool).tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ComfortSchedule":
        return cls(
            lower=np.asarray(data["lower"], dtype=float),
            upper=np.asarray(data["upper"], dtype=float),
            occupied=np.asarray(data["occupied"], dtype=bool),
        )


@dataclass(frozen=True)
class Tariff:
    """Energy, demand and curtailment prices.

    ``energy_price`` and ``curtailment_price`` are per-step series ($/kWh);
    ``demand_charge`` is $/kW on the horizon peak.
    """

    energy_price: np.ndarray
    demand_charge: float = 0.0
    curtailment_price: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cpr_reward: float = 0.0

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.energy_price) < 0) or self.demand_charge < 0 or self.cpr_reward < 0:
            raise ValueError("prices must be nonnegative")
        if np.any(np.asarray(self.curtailment_price) < 0):
            raise ValueError("prices must be nonnegative")

    @classmethod
    def flat(cls, n_steps: int, rate: float = 0.05303, demand_charge: float = 14.58) -> "Tariff":
        return cls(energy_price=np.full(n_steps, rate), demand_charge=demand_charge)

    def energy_window(self, start: int, length: int) -> np.ndarray:
        return _window(np.asarray(self.energy_price, dtype=float), start, length)

    def curtailment_window(self, start: int, length: int) -> np.ndarray:
        cp = np.asarray(self.curtailment_price, dtype=float)
        if cp.size == 0:
            return np.zeros(length)
        return _window(cp, start, length)

    def to_json(self) -> dict:
        return {
            "energy_price": np.asarray(self.energy_price).tolist(),
            "demand_charge": self.demand_charge,
            "curtailment_price": np.asarray(self.curtailment_price).tolist(),
            "cpr_reward": self.cpr_reward,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Tariff":
        return cls(
            energy_price=np.asarray(data["energy_price"], dtype=float),
            demand_charge=float(data.get("demand_charge", 0.0)),
            curtailment_price=np.asarray(data.get("curtailment_price", []), dtype=float),
            cpr_reward=float(data.get("cpr_reward", 0.0)),
        )


def _window(series: np.ndarray, start: int, length: int) -> np.ndarray:
    idx = np.minimum(np.arange(start, start + length), series.size - 1)
    return series[idx]


# TOU periods (hour ranges, weekdays); weekends are off-peak
TOU_RATES = {"off": 0.074, "mid": 0.102, "on": 0.151}


def tou_rate(ts: datetime, rates: dict[str, float] = TOU_RATES) -> float:
    if ts.weekday() >= 5:
        return rates["off"]
    if 11 <= ts.hour < 17:
        return rates["on"]
    if 7 <= ts.hour < 11 or 17 <= ts.hour < 19:
        return rates["mid"]
    return rates["off"]
