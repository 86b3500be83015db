"""Two-zone RC-network building used as the ground-truth plant.

Each zone has an air node and a mass node (2R2C) and neighbouring air
nodes exchange heat through one inter-zone resistance::

    C_a dθ/dt = (T_out - θ)/R_ao + (m - θ)/R_am + Σ (θ_j - θ)/R_z + q_air
    C_m dm/dt = (θ - m)/R_am + q_mass

Units are kW, kWh/°C and °C/kW so that ``dt`` is in hours.  Steps use
implicit Euler, which keeps the update affine in (state, injections).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import (
    DT_HOURS,
    LADDER,
    STEPS_PER_DAY,
    clock_features,
    is_occupied,
)

T_MIN, T_MAX = -20.0, 60.0
DEFAULT_START = datetime(2021, 1, 4)


class NumericOverflow(RuntimeError):
    """Plant temperatures left the physical range."""


@dataclass(frozen=True)
class ZoneParams:
    c_air: float = 0.6  # kWh/°C
    c_mass: float = 6.0
    r_am: float = 0.4  # °C/kW
    r_ao: float = 3.0
    solar_aperture: float = 2.5  # m² equivalent
    solar_to_mass: float = 0.5
    gain_occupied: float = 2.0  # kW
    gain_unoccupied: float = 0.3
    # thermal kW delivered by each stage (negative = heat removed)
    cool_stage1: float = -6.0
    cool_stage2: float = -5.0
    fan_gain: float = 0.4


@dataclass(frozen=True)
class RcNetwork:
    zones: tuple[ZoneParams, ...] = (
        ZoneParams(),
        ZoneParams(c_air=0.5, r_ao=2.5, solar_aperture=3.5, gain_occupied=2.4),
    )
    r_inter: float = 1.5

    def __post_init__(self) -> None:
        for z in self.zones:
            if min(z.c_air, z.c_mass, z.r_am, z.r_ao) <= 0:
                raise ValueError("capacitances and resistances must be positive")
            if z.cool_stage1 >= 0 or z.cool_stage2 >= 0:
                raise ValueError("cooling delivery must be negative")
        if self.r_inter <= 0:
            raise ValueError("inter-zone resistance must be positive")

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    def system(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Continuous-time ``dx/dt = A x + b_oat T_out + Cinv q``.

        Returns ``(A, b_oat, Cinv)`` with state ``x = [θ_1..θ_n, m_1..m_n]``.
        """
        n = self.n_zones
        A = np.zeros((2 * n, 2 * n))
        b = np.zeros(2 * n)
        cap = np.array([z.c_air for z in self.zones] + [z.c_mass for z in self.zones])
        for i, z in enumerate(self.zones):
            a, m = i, n + i
            A[a, a] -= 1.0 / z.r_ao + 1.0 / z.r_am
            A[a, m] += 1.0 / z.r_am
            A[m, m] -= 1.0 / z.r_am
            A[m, a] += 1.0 / z.r_am
            b[a] += 1.0 / z.r_ao
        for i in range(n - 1):
            j = i + 1
            g = 1.0 / self.r_inter
            A[i, i] -= g
            A[j, j] -= g
            A[i, j] += g
            A[j, i] += g
        cinv = 1.0 / cap
        return A * cinv[:, None], b * cinv, np.diag(cinv)

    def injections(self, codes: np.ndarray, ghi: float, occupied: bool) -> np.ndarray:
        """Heat injected into every node (kW), ordered like the state."""
        n = self.n_zones
        q = np.zeros(2 * n)
        stages = LADDER[np.asarray(codes, dtype=np.intp)]
        for i, z in enumerate(self.zones):
            c2, c1, fan = stages[i]
            solar = z.solar_aperture * ghi / 1000.0
            gain = z.gain_occupied if occupied else z.gain_unoccupied
            q[i] = gain + (1.0 - z.solar_to_mass) * solar + c1 * z.cool_stage1 + c2 * z.cool_stage2 + fan * z.fan_gain
            q[n + i] = z.solar_to_mass * solar
        return q

    def to_json(self) -> dict:
        return {"zones": [asdict(z) for z in self.zones], "r_inter": self.r_inter}

    @classmethod
    def from_json(cls, data: dict) -> "RcNetwork":
        return cls(zones=tuple(ZoneParams(**z) for z in data["zones"]), r_inter=float(data["r_inter"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "RcNetwork":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PlantState:
    theta: np.ndarray
    mass: np.ndarray
    timestamp: datetime = DEFAULT_START

    def __post_init__(self) -> None:
        for arr in (self.theta, self.mass):
            if np.any(~np.isfinite(arr)) or np.any(arr < T_MIN) or np.any(arr > T_MAX):
                raise NumericOverflow(f"temperature outside [{T_MIN}, {T_MAX}] °C: {arr}")

    def vector(self) -> np.ndarray:
        return np.concatenate([self.theta, self.mass])

    @classmethod
    def uniform(cls, n_zones: int, temp: float, timestamp: datetime = DEFAULT_START) -> "PlantState":
        return cls(np.full(n_zones, float(temp)), np.full(n_zones, float(temp)), timestamp)


class _Stepper:
    """Cached implicit-Euler factor for one (network, dt) pair."""

    _cache: dict[tuple, tuple] = {}

    @classmethod
    def get(cls, network: RcNetwork, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        key = (network, dt)
        if key not in cls._cache:
            A, b, cinv = network.system()
            M = np.linalg.inv(np.eye(A.shape[0]) - dt * A)
            cls._cache[key] = (M, b, cinv)
        return cls._cache[key]


def plant_step(
    network: RcNetwork,
    state: PlantState,
    codes: Sequence[int] | np.ndarray,
    oat: float,
    ghi: float,
    dt: float = DT_HOURS,
    occupied: bool | None = None,
) -> PlantState:
    """Advance the plant one step under constant inputs.

    ``codes`` holds one ladder code per zone.  Occupancy (which sets the
    internal gains) defaults to the schedule at ``state.timestamp``.
    """
    if occupied is None:
        occupied = is_occupied(state.timestamp)
    M, b, cinv = _Stepper.get(network, dt)
    q = network.injections(np.asarray(codes), ghi, occupied)
    x = M @ (state.vector() + dt * (b * oat + cinv @ q))
    n = network.n_zones
    return PlantState(x[:n], x[n:], state.timestamp + timedelta(hours=dt))


def steady_state(network: RcNetwork, codes: Sequence[int], oat: float, ghi: float, occupied: bool) -> np.ndarray:
    """Fixed point of the continuous dynamics under constant inputs."""
    A, b, cinv = network.system()
    q = network.injections(np.asarray(codes), ghi, occupied)
    return np.linalg.solve(A, -(b * oat + cinv @ q))


# ---------------------------------------------------------------------------
# Weather
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeatherTrace:
    timestamps: list[datetime]
    oat: np.ndarray
    ghi: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps)

    def exogenous(self) -> np.ndarray:
        """Exogenous feature matrix ``(n, 6)``: OAT, GHI and clock encodings."""
        clocks = np.array([clock_features(ts) for ts in self.timestamps])
        return np.column_stack([self.oat, self.ghi, clocks])

    def slice(self, start: int, stop: int) -> "WeatherTrace":
        return WeatherTrace(self.timestamps[start:stop], self.oat[start:stop], self.ghi[start:stop])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["timestamp", "oat_c", "ghi_w_m2"])
            for ts, o, g in zip(self.timestamps, self.oat, self.ghi):
                w.writerow([ts.isoformat(), repr(float(o)), repr(float(g))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "WeatherTrace":
        ts, oat, ghi = [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                ts.append(datetime.fromisoformat(row["timestamp"]))
                oat.append(float(row["oat_c"]))
                ghi.append(float(row["ghi_w_m2"]))
        return cls(ts, np.array(oat), np.array(ghi))


@dataclass(frozen=True)
class WeatherConfig:
    mean: float = 24.0
    amplitude: float = 5.0
    peak_hour: float = 15.0
    daily_mean_std: float = 1.5
    noise_std: float = 0.1
    sunrise: float = 7.0
    sunset: float = 18.0
    ghi_peak: float = 850.0


def synthesize_weather(
    seed: int,
    days: int,
    start: datetime = DEFAULT_START,
    config: WeatherConfig = WeatherConfig(),
    dt: float = DT_HOURS,
) -> WeatherTrace:
    """Diurnal OAT sinusoid and half-sine GHI with seeded perturbations.

    Day-to-day variation enters as a random daily mean offset, linearly
    interpolated between days so the afternoon peak stays put; a small AR(1)
    term adds high-frequency texture.  GHI is scaled by a per-day clearness
    factor and is exactly zero outside the daylight window.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    rng = np.random.default_rng(seed)
    steps_per_day = int(round(24 / dt))
    n = days * steps_per_day
    hours = np.arange(n) * dt
    hod = hours % 24.0

    offsets = rng.normal(0.0, config.daily_mean_std, size=days + 1)
    day_pos = hours / 24.0
    offset = np.interp(day_pos, np.arange(days + 1), offsets)

    ar = np.empty(n)
    phi = 0.9
    innov = rng.normal(0.0, config.noise_std * math.sqrt(1 - phi**2), size=n)
    prev = 0.0
    for i in range(n):
        prev = phi * prev + innov[i]
        ar[i] = prev

    oat = config.mean + offset + config.amplitude * np.cos(2 * math.pi * (hod - config.peak_hour) / 24.0) + ar

    clearness = rng.uniform(0.55, 1.0, size=days)
    daylight = (hod > config.sunrise) & (hod < config.sunset)
    shape = np.where(daylight, np.sin(math.pi * (hod - config.sunrise) / (config.sunset - config.sunrise)), 0.0)
    jitter = 1.0 + rng.normal(0.0, 0.05, size=n)
    ghi = config.ghi_peak * clearness[(hours // 24).astype(int)] * shape * jitter
    ghi = np.where(daylight, np.clip(ghi, 0.0, None), 0.0)

    timestamps = [start + timedelta(hours=float(h)) for h in hours]
    return WeatherTrace(timestamps, oat, ghi)


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Recorded closed-loop run.

    Row ``k`` holds the exogenous sample ``s^k`` and codes ``u^k`` applied
    over step ``k`` together with the resulting temperature ``θ^k`` and
    ``Δθ^k = θ^k - θ^{k-1}``.
    """

    timestamps: list[datetime]
    exogenous: np.ndarray  # (n, 6)
    codes: np.ndarray  # (n, n_zones) int
    theta: np.ndarray  # (n, n_zones)
    dtheta: np.ndarray  # (n, n_zones)
    theta0: np.ndarray = field(default_factory=lambda: np.zeros(0))  # θ before row 0

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def n_zones(self) -> int:
        return self.codes.shape[1]

    def columns(self) -> list[str]:
        cols = ["timestamp", "oat", "ghi", "tod_sin", "tod_cos", "dow_sin", "dow_cos"]
        for z in range(self.n_zones):
            cols += [f"code_z{z}", f"theta_z{z}", f"dtheta_z{z}"]
        return cols

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["# theta0"] + [repr(float(v)) for v in self.theta0])
            w.writerow(self.columns())
            for k, ts in enumerate(self.timestamps):
                row = [ts.isoformat()] + [repr(float(v)) for v in self.exogenous[k]]
                for z in range(self.n_zones):
                    row += [int(self.codes[k, z]), repr(float(self.theta[k, z])), repr(float(self.dtheta[k, z]))]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path: str | Path) -> "Trajectory":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            first = next(reader)
            theta0 = np.array([float(v) for v in first[1:]])
            header = next(reader)
            rows = list(reader)
        n_zones = sum(1 for h in header if h.startswith("code_z"))
        ts = [datetime.fromisoformat(r[0]) for r in rows]
        exo = np.array([[float(v) for v in r[1:7]] for r in rows])
        codes = np.array([[int(r[7 + 3 * z]) for z in range(n_zones)] for r in rows])
        theta = np.array([[float(r[8 + 3 * z]) for z in range(n_zones)] for r in rows])
        dtheta = np.array([[float(r[9 + 3 * z]) for z in range(n_zones)] for r in rows])
        return cls(ts, exo, codes, theta, dtheta, theta0)


Policy = Callable[[np.ndarray, datetime, np.ndarray], np.ndarray]


class ExcitationPolicy:
    """Thermostat with randomized setpoints plus random ladder excursions.

    The setpoint of every zone is redrawn every 1-4 h from ``setpoint_range``;
    a one-stage-per-step thermostat tracks it.  With probability ``epsilon``
    per step a zone jumps to a uniformly drawn code and holds it for 1-6
    steps, which covers the fan-only and stage-2 rungs.
    """

    def __init__(self, n_zones: int, seed: int = 0, epsilon: float = 0.08,
                 setpoint_range: tuple[float, float] = (20.0, 26.0), deadband: float = 0.5):
        self.rng = np.random.default_rng(seed)
        self.n_zones = n_zones
        self.epsilon = epsilon
        self.setpoint_range = setpoint_range
        self.deadband = deadband
        self._setpoint = self.rng.uniform(*setpoint_range, size=n_zones)
        self._sp_left = self.rng.integers(12, 49, size=n_zones)
        self._hold = np.zeros(n_zones, dtype=int)
        self._held = np.zeros(n_zones, dtype=int)

    def __call__(self, theta: np.ndarray, ts: datetime, prev: np.ndarray) -> np.ndarray:
        out = np.array(prev, dtype=int)
        for z in range(self.n_zones):
            self._sp_left[z] -= 1
            if self._sp_left[z] <= 0:
                self._setpoint[z] = self.rng.uniform(*self.setpoint_range)
                self._sp_left[z] = self.rng.integers(12, 49)
            if self._hold[z] > 0:
                self._hold[z] -= 1
                out[z] = self._held[z]
                continue
            if self.rng.random() < self.epsilon:
                self._held[z] = self.rng.integers(0, 4)
                self._hold[z] = self.rng.integers(0, 6)
                out[z] = self._held[z]
                continue
            sp = self._setpoint[z]
            if theta[z] > sp:
                out[z] = min(3, prev[z] + 1)
            elif theta[z] < sp - self.deadband:
                out[z] = max(0, prev[z] - 1)
        return out


def simulate(
    network: RcNetwork,
    trace: WeatherTrace,
    policy: Policy,
    initial: PlantState | None = None,
) -> Trajectory:
    """Run ``policy`` in closed loop over the whole weather trace."""
    n = len(trace)
    nz = network.n_zones
    state = initial or PlantState.uniform(nz, 22.0, trace.timestamps[0])
    state = replace(state, timestamp=trace.timestamps[0])
    theta0 = state.theta.copy()
    exo = trace.exogenous()
    codes = np.zeros((n, nz), dtype=int)
    theta = np.zeros((n, nz))
    prev = np.zeros(nz, dtype=int)
    for k in range(n):
        u = np.asarray(policy(state.theta, trace.timestamps[k], prev), dtype=int)
        state = plant_step(network, state, u, trace.oat[k], trace.ghi[k])
        codes[k] = u
        theta[k] = state.theta
        prev = u
    prev_theta = np.vstack([theta0[None, :], theta[:-1]])
    return Trajectory(list(trace.timestamps), exo, codes, theta, theta - prev_theta, theta0)


def generate_dataset(
    network: RcNetwork,
    trace: WeatherTrace | None = None,
    policy: Policy | None = None,
    months: float = 6,
    seed: int = 0,
    weather: WeatherConfig = WeatherConfig(),
) -> Trajectory:
    """Excite the plant and record ``(s, u, Δθ)`` at 5-minute resolution.

    A month is 30 days.  When ``trace`` is omitted a synthetic one is drawn
    from ``seed``.
    """
    days = int(round(months * 30))
    if trace is None:
        trace = synthesize_weather(seed, days, config=weather)
    else:
        trace = trace.slice(0, days * STEPS_PER_DAY)
    if policy is None:
        policy = ExcitationPolicy(network.n_zones, seed=seed + 1)
    return simulate(network, trace, policy)
