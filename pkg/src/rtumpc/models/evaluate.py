from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset


@dataclass
class RmseReport:
    """Per-zone RMSE (°C) averaged over evaluation batches, with its spread."""

    mean: np.ndarray  # (nz,)
    std: np.ndarray  # (nz,)
    overall: float
    by_step: np.ndarray  # (T, nz)

    def to_json(self) -> dict:
        return {"rmse": self.mean.tolist(), "std": self.std.tolist(), "overall": self.overall,
                "by_step": self.by_step.tolist()}


def evaluate_rmse(model, dataset: Dataset, split: str = "test", batch: int = 256,
                  level: str = "dtheta") -> RmseReport:
    """Multi-step RMSE of ``model`` on held-out windows.

    ``level="dtheta"`` scores the predicted increments; ``level="theta"``
    scores the temperature trajectory rebuilt from ``θ^{t-1}``.
    """
    anchors = dataset.anchors(split)
    per_batch = []
    sq_sum = None
    count = 0
    for i in range(0, len(anchors), batch):
        w = dataset.window(anchors[i:i + batch])
        pred = model.predict(w)
        truth = w.target
        if level == "theta":
            pred = np.cumsum(pred, axis=1)
            truth = np.cumsum(truth, axis=1)
        err2 = (pred - truth) ** 2
        per_batch.append(np.sqrt(err2.mean(axis=(0, 1))))
        s = err2.sum(axis=0)
        sq_sum = s if sq_sum is None else sq_sum + s
        count += err2.shape[0]
    per_batch = np.array(per_batch)
    by_step = np.sqrt(sq_sum / count)
    return RmseReport(
        mean=per_batch.mean(axis=0),
        std=per_batch.std(axis=0),
        overall=float(np.sqrt((sq_sum / count).mean())),
        by_step=by_step,
    )
