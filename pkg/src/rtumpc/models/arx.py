"""Multi-output first-order ARX benchmark.

Regressors for ``Δθ_t`` (all zones jointly): intercept, OAT and the four
clock encodings at ``t``, GHI at ``t-3 .. t``, ``Δθ`` at ``t-4 .. t-1`` and
the stage bits applied at ``t``.  Multi-step predictions feed predicted
``Δθ`` back into the lags.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import LADDER, N_COMPONENTS

GHI_LAGS = 4  # t-3 .. t
DTHETA_LAGS = 4  # t-4 .. t-1


class SingularDesign(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class ArxParams:
    coef: np.ndarray  # (n_features, n_zones)
    n_zones: int

    def to_json(self) -> dict:
        return {"format": "arx-weights", "version": 1, "n_zones": self.n_zones,
                "shape": list(self.coef.shape), "values": self.coef.reshape(-1).tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "ArxParams":
        return cls(np.asarray(data["values"], dtype=float).reshape(data["shape"]), int(data["n_zones"]))


def n_features(n_zones: int) -> int:
    return 1 + 5 + GHI_LAGS + DTHETA_LAGS * n_zones + N_COMPONENTS * n_zones


def design_row(exo_t: np.ndarray, ghi_lags: np.ndarray, dtheta_lags: np.ndarray, bits_t: np.ndarray) -> np.ndarray:
    """Regressor vector(s).

    Shapes (leading batch axes allowed): ``exo_t (..., 6)``,
    ``ghi_lags (..., 4)`` oldest first, ``dtheta_lags (..., 4, nz)`` oldest
    first, stage bits ``bits_t (..., nz, 3)``.
    """
    lead = exo_t.shape[:-1]
    bits = np.asarray(bits_t, dtype=float).reshape(lead + (-1,))
    return np.concatenate(
        [np.ones(lead + (1,)), exo_t[..., [0, 2, 3, 4, 5]], ghi_lags,
         dtheta_lags.reshape(lead + (-1,)), bits.astype(float)],
        axis=-1,
    )


def fit_arx(exo: np.ndarray, codes: np.ndarray, dtheta: np.ndarray, rows: np.ndarray | None = None) -> ArxParams:
    """Least-squares fit on the rows ``rows`` of a trajectory (default: all usable)."""
    n, nz = dtheta.shape
    lag = max(GHI_LAGS - 1, DTHETA_LAGS)
    rows = np.arange(lag, n) if rows is None else np.asarray(rows)
    rows = rows[rows >= lag]
    gi = rows[:, None] + np.arange(-(GHI_LAGS - 1), 1)[None, :]
    di = rows[:, None] + np.arange(-DTHETA_LAGS, 0)[None, :]
    Phi = design_row(exo[rows], exo[gi, 1], dtheta[di], LADDER[codes[rows]])
    if np.linalg.matrix_rank(Phi) < Phi.shape[1]:
        raise SingularDesign("ARX design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(Phi, dtheta[rows], rcond=None)
    return ArxParams(coef, nz)


def predict_arx(params: ArxParams, past_exo: np.ndarray, past_dtheta: np.ndarray,
                fut_exo: np.ndarray, fut_bits: np.ndarray, horizon: int | None = None) -> np.ndarray:
    """Recursive multi-step prediction.

    ``past_*`` cover at least the lag depth before the first predicted step
    and carry a leading batch axis: ``past_exo (B, w, 6)``,
    ``past_dtheta (B, w, nz)``, ``fut_exo (B, T, 6)``, stage bits
    ``fut_bits (B, T, nz, 3)``.  Batch axes of size one are broadcast.
    """
    fut_bits = np.asarray(fut_bits, dtype=float)
    B, T, nz, _ = fut_bits.shape
    horizon = T if horizon is None else horizon
    if past_dtheta.shape[-2] < DTHETA_LAGS or past_exo.shape[-2] < GHI_LAGS - 1:
        raise ValueError("history does not cover the required lags")
    past_exo = np.broadcast_to(past_exo, (B,) + past_exo.shape[-2:])
    fut_exo = np.broadcast_to(fut_exo, (B,) + fut_exo.shape[-2:])
    past_dtheta = np.broadcast_to(past_dtheta, (B,) + past_dtheta.shape[-2:])
    ghi = np.concatenate([past_exo[:, -(GHI_LAGS - 1):, 1], fut_exo[:, :horizon, 1]], axis=1)
    dth = np.concatenate([past_dtheta[:, -DTHETA_LAGS:], np.zeros((B, horizon, nz))], axis=1)
    coef = params.coef
    # exogenous and control part is known up front for every step
    base = design_row(fut_exo[:, :horizon], np.zeros((B, horizon, GHI_LAGS)),
                      np.zeros((B, horizon, DTHETA_LAGS, nz)), fut_bits[:, :horizon])
    ghi_cols = slice(6, 6 + GHI_LAGS)
    dth_cols = slice(6 + GHI_LAGS, 6 + GHI_LAGS + DTHETA_LAGS * nz)
    known = base @ coef + np.einsum("btl,lz->btz", _ghi_windows(ghi, horizon), coef[ghi_cols])
    W_d = coef[dth_cols]
    for k in range(horizon):
        lags = dth[:, k:k + DTHETA_LAGS].reshape(B, -1)
        dth[:, DTHETA_LAGS + k] = known[:, k] + lags @ W_d
    return dth[:, DTHETA_LAGS:]


def _ghi_windows(ghi: np.ndarray, horizon: int) -> np.ndarray:
    idx = np.arange(horizon)[:, None] + np.arange(GHI_LAGS)[None, :]
    return ghi[:, idx]
