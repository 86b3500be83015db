"""Thermal models behind one prediction interface.

Every model exposes ``predict(window)`` for evaluation plus the pair
``context(past_exo, past_codes, past_dtheta)`` / ``rollout(ctx, fut_exo,
fut_bits)`` used by the MPC, where ``fut_bits`` carries the stage bits of a
batch of candidate plans ``(B, T, n_zones, 3)``.  Bits may be fractional,
which is how the relaxed problem is probed.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Protocol, Sequence

import numpy as np

from ..core import LADDER, N_EXOGENOUS
from . import arx, icrnn
from .dataset import Dataset, Window
from .scaling import ScalerParams


class ThermalModel(Protocol):
    kind: str
    n_zones: int

    def predict(self, window: Window) -> np.ndarray: ...

    def context(self, past_exo: np.ndarray, past_codes: np.ndarray, past_dtheta: np.ndarray) -> Any: ...

    def rollout(self, ctx: Any, fut_exo: np.ndarray, fut_bits: np.ndarray) -> np.ndarray: ...


def bits_of(codes: np.ndarray) -> np.ndarray:
    """Stage bits ``(..., nz, 3)`` of integer codes ``(..., nz)``."""
    return LADDER[np.asarray(codes, dtype=np.intp)].astype(float)


def raw_features(exo: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """``x = [s; u; -u]`` from stage bits ``(..., nz, 3)``; bits may be fractional."""
    bits = np.asarray(bits, dtype=float)
    flat = bits.reshape(bits.shape[:-2] + (-1,))
    exo = np.broadcast_to(exo, flat.shape[:-1] + (exo.shape[-1],))
    return np.concatenate([exo, flat, -flat], axis=-1)


def control_ranges(n_zones: int) -> dict[int, tuple[float, float]]:
    nb = 3 * n_zones
    fixed = {N_EXOGENOUS + i: (0.0, 1.0) for i in range(nb)}
    fixed.update({N_EXOGENOUS + nb + i: (-1.0, 0.0) for i in range(nb)})
    return fixed


class DatasetWindows:
    """Scaled ICRNN windows drawn from a :class:`Dataset`."""

    def __init__(self, dataset: Dataset, x_scaler: ScalerParams, y_scaler: ScalerParams):
        t = dataset.traj
        self.ds = dataset
        self.X = x_scaler.scale(raw_features(t.exogenous, bits_of(t.codes)))
        self.Y = y_scaler.scale(t.dtheta)
        self._offsets = np.arange(-dataset.past, dataset.horizon)
        self._fut = np.arange(dataset.horizon)

    def size(self, split: str) -> int:
        return len(self.ds.anchors(split))

    def get(self, split: str, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = self.ds.anchors(split)[idx]
        return self.X[a[:, None] + self._offsets], self.Y[a[:, None] + self._fut]


@dataclass
class IcrnnContext:
    h: np.ndarray
    x_prev: np.ndarray


class IcrnnModel:
    kind = "icrnn"

    def __init__(self, params: icrnn.IcrnnParams, x_scaler: ScalerParams, y_scaler: ScalerParams, n_zones: int):
        self.params = params
        self.x_scaler = x_scaler
        self.y_scaler = y_scaler
        self.n_zones = n_zones

    @classmethod
    def fit(cls, dataset: Dataset, config: icrnn.TrainConfig = icrnn.TrainConfig()) -> tuple["IcrnnModel", icrnn.TrainHistory]:
        t = dataset.traj
        nz = dataset.n_zones
        train_rows = np.unique(dataset.anchors("train")[:, None] + np.arange(-dataset.past, dataset.horizon))
        feats = raw_features(t.exogenous[train_rows], bits_of(t.codes[train_rows]))
        xs = ScalerParams.fit(feats, fixed=control_ranges(nz))
        ys = ScalerParams.fit(t.dtheta[train_rows])
        src = DatasetWindows(dataset, xs, ys)
        params, hist = icrnn.train_icrnn(src, feats.shape[-1], nz, config, window=dataset.past)
        return cls(params, xs, ys, nz), hist

    @classmethod
    def grid_search(cls, dataset: Dataset, lrs: Sequence[float], hidden: Sequence[int],
                    config: icrnn.TrainConfig = icrnn.TrainConfig()) -> tuple["IcrnnModel", list[dict]]:
        """Train every ``(lr, n_hidden)`` pair; keep the lowest validation loss."""
        best, table = None, []
        for lr, nh in itertools.product(lrs, hidden):
            model, hist = cls.fit(dataset, replace(config, lr=lr, n_hidden=nh))
            val = hist.val_loss[hist.best_epoch]
            table.append({"lr": lr, "n_hidden": nh, "val_loss": val, "epochs": len(hist.val_loss)})
            if best is None or val < best[0]:
                best = (val, model)
        return best[1], table

    def features(self, exo: np.ndarray, bits: np.ndarray) -> np.ndarray:
        return self.x_scaler.scale(raw_features(exo, bits))

    def predict(self, window: Window) -> np.ndarray:
        X = np.concatenate(
            [self.features(window.past_exo, bits_of(window.past_codes)),
             self.features(window.fut_exo, bits_of(window.fut_codes))],
            axis=1,
        )
        Y = icrnn.icrnn_forward(self.params, X, window.fut_codes.shape[1])
        return self.y_scaler.unscale(Y)

    def context(self, past_exo, past_codes, past_dtheta=None) -> IcrnnContext:
        h, x_prev = icrnn.warmup(self.params, self.features(past_exo, bits_of(past_codes))[None])
        return IcrnnContext(h[0], x_prev[0])

    def rollout(self, ctx: IcrnnContext, fut_exo: np.ndarray, fut_bits: np.ndarray) -> np.ndarray:
        X = self.features(fut_exo, fut_bits)
        return self.y_scaler.unscale(icrnn.rollout(self.params, ctx.h, ctx.x_prev, X))

    def to_json(self) -> dict:
        return {"kind": self.kind, "n_zones": self.n_zones, "params": self.params.to_json(),
                "x_scaler": self.x_scaler.to_json(), "y_scaler": self.y_scaler.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "IcrnnModel":
        return cls(icrnn.IcrnnParams.from_json(data["params"]), ScalerParams.from_json(data["x_scaler"]),
                   ScalerParams.from_json(data["y_scaler"]), int(data["n_zones"]))


@dataclass
class ArxContext:
    past_exo: np.ndarray
    past_dtheta: np.ndarray


class ArxModel:
    kind = "arx"

    def __init__(self, params: arx.ArxParams):
        self.params = params
        self.n_zones = params.n_zones

    @classmethod
    def fit(cls, dataset: Dataset) -> "ArxModel":
        t = dataset.traj
        return cls(arx.fit_arx(t.exogenous, t.codes, t.dtheta, rows=dataset.anchors("train")))

    def predict(self, window: Window, horizon: int | None = None) -> np.ndarray:
        return arx.predict_arx(self.params, window.past_exo, window.past_dtheta, window.fut_exo,
                               bits_of(window.fut_codes), horizon)

    def context(self, past_exo, past_codes, past_dtheta) -> ArxContext:
        return ArxContext(np.asarray(past_exo)[None], np.asarray(past_dtheta)[None])

    def rollout(self, ctx: ArxContext, fut_exo: np.ndarray, fut_bits: np.ndarray) -> np.ndarray:
        return arx.predict_arx(self.params, ctx.past_exo, ctx.past_dtheta, np.asarray(fut_exo)[None], fut_bits)

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "ArxModel":
        return cls(arx.ArxParams.from_json(data["params"]))


class MeanPredictor:
    """Predicts the training-set mean ``Δθ`` for every step."""

    kind = "mean"

    def __init__(self, mean: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.n_zones = self.mean.size

    @classmethod
    def fit(cls, dataset: Dataset) -> "MeanPredictor":
        return cls(dataset.traj.dtheta[dataset.anchors("train")].mean(axis=0))

    def predict(self, window: Window) -> np.ndarray:
        return np.broadcast_to(self.mean, window.target.shape).copy()


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_json()))


def load_model(path: str | Path):
    data = json.loads(Path(path).read_text())
    return {"icrnn": IcrnnModel, "arx": ArxModel}[data["kind"]].from_json(data)
