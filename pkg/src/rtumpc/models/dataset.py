"""Sliding-window view over a recorded plant trajectory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..plant import Trajectory

PAST_STEPS = 36  # 3 h
HORIZON = 24  # 2 h


@dataclass
class Window:
    """A batch of aligned past/future slices.

    Past arrays cover rows ``t-w .. t-1`` and future arrays rows
    ``t .. t+T-1`` for every anchor ``t``; ``theta_prev`` is ``θ^{t-1}``.
    """

    past_exo: np.ndarray  # (B, w, 6)
    past_codes: np.ndarray  # (B, w, nz)
    past_dtheta: np.ndarray  # (B, w, nz)
    fut_exo: np.ndarray  # (B, T, 6)
    fut_codes: np.ndarray  # (B, T, nz)
    target: np.ndarray  # (B, T, nz)
    theta_prev: np.ndarray  # (B, nz)

    def __len__(self) -> int:
        return self.target.shape[0]


class Dataset:
    """Anchors split 60/20/20 at random into train/validation/test.

    Windows are gathered on demand so months of data stay cheap to hold.
    """

    def __init__(self, traj: Trajectory, past: int = PAST_STEPS, horizon: int = HORIZON,
                 seed: int = 0, fractions: tuple[float, float, float] = (0.6, 0.2, 0.2), stride: int = 1):
        if len(traj) < past + horizon + 1:
            raise ValueError("trajectory shorter than one window")
        self.traj = traj
        self.past = past
        self.horizon = horizon
        anchors = np.arange(past, len(traj) - horizon + 1, stride)
        rng = np.random.default_rng(seed)
        perm = rng.permutation(anchors)
        n_tr = int(round(fractions[0] * len(perm)))
        n_va = int(round(fractions[1] * len(perm)))
        self.splits = {
            "train": np.sort(perm[:n_tr]),
            "val": np.sort(perm[n_tr:n_tr + n_va]),
            "test": np.sort(perm[n_tr + n_va:]),
        }

    @property
    def n_zones(self) -> int:
        return self.traj.n_zones

    def anchors(self, split: str) -> np.ndarray:
        return self.splits[split]

    def window(self, anchors: np.ndarray) -> Window:
        anchors = np.asarray(anchors)
        pi = anchors[:, None] + np.arange(-self.past, 0)[None, :]
        fi = anchors[:, None] + np.arange(self.horizon)[None, :]
        t = self.traj
        theta_prev = t.theta[anchors] - t.dtheta[anchors]
        return Window(
            past_exo=t.exogenous[pi],
            past_codes=t.codes[pi],
            past_dtheta=t.dtheta[pi],
            fut_exo=t.exogenous[fi],
            fut_codes=t.codes[fi],
            target=t.dtheta[fi],
            theta_prev=theta_prev,
        )

    def split_window(self, split: str) -> Window:
        return self.window(self.anchors(split))
