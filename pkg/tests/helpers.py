"""Small synthetic fixtures shared by the unit tests."""

from __future__ import annotations

import numpy as np

from rtumpc.control import RoundState
from rtumpc.core import ComfortSchedule, Tariff
from rtumpc.models import IcrnnModel, IcrnnParams, ScalerParams
from rtumpc.models.thermal import control_ranges

HOT_EXO = np.array([30.0, 400.0, 0.0, 1.0, 0.0, 1.0])


def random_icrnn(n_zones: int = 1, n_hidden: int = 8, seed: int = 0, window: int = 6) -> IcrnnModel:
    """Untrained convex model on the real feature layout; cooling lowers Δθ."""
    n_in = 6 + 6 * n_zones
    p = IcrnnParams.init(n_in, n_hidden, n_zones, seed=seed, window=window)
    # make the -u half dominate the output so stages cool on average
    p.P_3[:, 6 + 3 * n_zones:] += 0.6
    p.b_y[:] = -0.5
    xs = ScalerParams.fit(np.vstack([np.full(n_in, -1.0), np.full(n_in, 1.0)]), fixed=control_ranges(n_zones))
    lo = np.array([15.0, 0.0, -1.0, -1.0, -1.0, -1.0])
    hi = np.array([35.0, 900.0, 1.0, 1.0, 1.0, 1.0])
    xs = ScalerParams(np.concatenate([lo, xs.lo[6:]]), np.concatenate([hi, xs.hi[6:]]))
    # roughly +0.1 °C/step when off and -0.15 °C/step at full cooling
    ys = ScalerParams(np.full(n_zones, -0.18), np.full(n_zones, -0.04))
    return IcrnnModel(p, xs, ys, n_zones)


def flat_setup(n_zones: int, horizon: int, upper: float = 24.0, rate: float = 0.05303, demand: float = 14.58,
               steps: int = 400):
    schedule = ComfortSchedule(np.full((steps, n_zones), 20.0), np.full((steps, n_zones), upper),
                               np.ones(steps, dtype=bool))
    return schedule, Tariff(np.full(steps, rate), demand)


def round_state(n_zones: int, horizon: int, theta: float = 23.0, t: int = 0, applied=None,
                past: int = 6, exo=HOT_EXO) -> RoundState:
    if applied is None:
        applied = np.zeros((4, n_zones), dtype=np.int64)
    return RoundState(
        t=t,
        theta=np.full(n_zones, theta),
        past_exo=np.tile(exo, (past, 1)),
        past_codes=np.zeros((past, n_zones), dtype=np.int64),
        past_dtheta=np.zeros((past, n_zones)),
        applied=np.asarray(applied, dtype=np.int64),
        forecast=np.tile(exo, (horizon, 1)),
    )
