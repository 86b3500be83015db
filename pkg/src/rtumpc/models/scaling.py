from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScalerParams:
    """Column-wise min-max scaling to [0, 1]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.hi <= self.lo):
            raise ValueError("max must exceed min for every scaled feature")

    @classmethod
    def fit(cls, data: np.ndarray, fixed: dict[int, tuple[float, float]] | None = None) -> "ScalerParams":
        data = np.asarray(data, dtype=float).reshape(-1, np.shape(data)[-1])
        lo = data.min(axis=0)
        hi = data.max(axis=0)
        for col, (a, b) in (fixed or {}).items():
            lo[col], hi[col] = a, b
        # constant columns would divide by zero
        flat = hi - lo < 1e-12
        hi = np.where(flat, lo + 1.0, hi)
        return cls(lo, hi)

    @property
    def span(self) -> np.ndarray:
        return self.hi - self.lo

    def scale(self, x: np.ndarray) -> np.ndarray:
        return (x - self.lo) / self.span

    def unscale(self, z: np.ndarray) -> np.ndarray:
        return z * self.span + self.lo

    def to_json(self) -> dict:
        return {"min": self.lo.tolist(), "max": self.hi.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "ScalerParams":
        return cls(np.asarray(data["min"], dtype=float), np.asarray(data["max"], dtype=float))
