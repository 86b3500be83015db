"""Input convex recurrent network for multi-step Δθ prediction.

Recurrence over inputs ``x_t`` (exogenous features followed by the
extended controls ``[u, -u]``)::

    h_t = relu(U_h x_t + W_h h_{t-1} + P_2 x_{t-1} + b_h)
    y_t = W_y h_t + P_1 h_{t-1} + P_3 x_t + b_y

With ``U_h, W_h, P_2, W_y, P_1, P_3 >= 0`` every output is convex and
nondecreasing in every input coordinate.  ``h`` and ``x`` before the first
window step are zero.  A window of ``w`` past steps followed by ``T``
future steps yields ``T`` outputs, one per future step.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

log = logging.getLogger(__name__)

CONSTRAINED = ("U_h", "W_h", "P_2", "W_y", "P_1", "P_3")
NAMES = ("U_h", "W_h", "P_2", "b_h", "W_y", "P_1", "P_3", "b_y")
FORMAT = "icrnn-weights"
VERSION = 1


class ShapeMismatch(ValueError):
    pass


class Diverged(RuntimeError):
    pass


@dataclass
class IcrnnParams:
    U_h: np.ndarray  # (n_h, n_x)
    W_h: np.ndarray  # (n_h, n_h)
    P_2: np.ndarray  # (n_h, n_x)
    b_h: np.ndarray  # (n_h,)
    W_y: np.ndarray  # (n_y, n_h)
    P_1: np.ndarray  # (n_y, n_h)
    P_3: np.ndarray  # (n_y, n_x)
    b_y: np.ndarray  # (n_y,)
    window: int = 36

    @property
    def n_hidden(self) -> int:
        return self.U_h.shape[0]

    @property
    def n_in(self) -> int:
        return self.U_h.shape[1]

    @property
    def n_out(self) -> int:
        return self.W_y.shape[0]

    @classmethod
    def init(cls, n_in: int, n_hidden: int, n_out: int, seed: int = 0, window: int = 36) -> "IcrnnParams":
        rng = np.random.default_rng(seed)

        def nonneg(rows, cols, scale):
            return rng.uniform(0.0, scale, size=(rows, cols))

        return cls(
            U_h=nonneg(n_hidden, n_in, 1.0 / n_in),
            W_h=nonneg(n_hidden, n_hidden, 0.5 / n_hidden),
            P_2=nonneg(n_hidden, n_in, 0.5 / n_in),
            b_h=rng.normal(0.0, 0.1, size=n_hidden),
            W_y=nonneg(n_out, n_hidden, 1.0 / n_hidden),
            P_1=nonneg(n_out, n_hidden, 0.5 / n_hidden),
            P_3=nonneg(n_out, n_in, 0.5 / n_in),
            b_y=np.zeros(n_out),
            window=window,
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in NAMES}

    def copy(self) -> "IcrnnParams":
        return IcrnnParams(**{k: v.copy() for k, v in self.arrays().items()}, window=self.window)

    def is_nonneg(self) -> bool:
        return all(np.all(getattr(self, k) >= 0) for k in CONSTRAINED)

    def to_json(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "window": self.window,
            "tensors": {
                k: {"shape": list(v.shape), "values": v.reshape(-1).tolist()} for k, v in self.arrays().items()
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "IcrnnParams":
        if data.get("format") != FORMAT or data.get("version") != VERSION:
            raise ValueError(f"unsupported weights file: {data.get('format')} v{data.get('version')}")
        arrays = {
            k: np.asarray(t["values"], dtype=float).reshape(t["shape"]) for k, t in data["tensors"].items()
        }
        return cls(**arrays, window=int(data["window"]))


def project_nonneg(params: IcrnnParams) -> IcrnnParams:
    """Clamp the convexity-constrained matrices at zero (biases untouched)."""
    out = params.copy()
    for k in CONSTRAINED:
        np.maximum(getattr(out, k), 0.0, out=getattr(out, k))
    return out


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------


def _check(params: IcrnnParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[2] != params.n_in:
        raise ShapeMismatch(f"expected (..., L, {params.n_in}) inputs, got {X.shape}")
    return X


def warmup(params: IcrnnParams, X_past: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run the recurrence over past inputs; returns the final ``(h, x)``."""
    X = _check(params, X_past)
    B = X.shape[0]
    h = np.zeros((B, params.n_hidden))
    x_prev = np.zeros((B, params.n_in))
    UT, WT, P2T = params.U_h.T, params.W_h.T, params.P_2.T
    for t in range(X.shape[1]):
        x = X[:, t]
        h = np.maximum(x @ UT + h @ WT + x_prev @ P2T + params.b_h, 0.0)
        x_prev = x
    return h, x_prev


def rollout(params: IcrnnParams, h: np.ndarray, x_prev: np.ndarray, X_future: np.ndarray) -> np.ndarray:
    """Continue the recurrence from ``(h, x_prev)`` and emit one output per step.

    ``h`` and ``x_prev`` broadcast against the batch of ``X_future``.
    """
    X = _check(params, X_future)
    B, T, _ = X.shape
    h = np.broadcast_to(h, (B, params.n_hidden))
    x_prev = np.broadcast_to(x_prev, (B, params.n_in))
    UT, WT, P2T = params.U_h.T, params.W_h.T, params.P_2.T
    WyT, P1T, P3T = params.W_y.T, params.P_1.T, params.P_3.T
    # input-only terms for every step in one shot
    xin_h = X @ UT
    xin_y = X @ P3T
    Y = np.empty((B, T, params.n_out))
    for t in range(T):
        h_new = np.maximum(xin_h[:, t] + h @ WT + x_prev @ P2T + params.b_h, 0.0)
        Y[:, t] = h_new @ WyT + h @ P1T + xin_y[:, t] + params.b_y
        h = h_new
        x_prev = X[:, t]
    return Y


def icrnn_forward(params: IcrnnParams, window: np.ndarray, horizon: int | None = None) -> np.ndarray:
    """Outputs for the last ``horizon`` steps of ``window``.

    ``window`` is ``(L, n_x)`` or ``(B, L, n_x)`` with ``L = w + horizon``;
    when ``horizon`` is omitted it is ``L - params.window``.
    """
    X = _check(params, window)
    squeeze = np.ndim(window) == 2
    L = X.shape[1]
    if horizon is None:
        horizon = L - params.window
    if horizon < 1 or horizon > L:
        raise ShapeMismatch(f"window of length {L} cannot yield horizon {horizon}")
    h, x_prev = warmup(params, X[:, : L - horizon])
    Y = rollout(params, h, x_prev, X[:, L - horizon:])
    return Y[0] if squeeze else Y


def loss_and_grad(params: IcrnnParams, X: np.ndarray, Y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared error over the last ``Y.shape[1]`` steps and its gradient."""
    X = _check(params, X)
    B, L, n_x = X.shape
    T = Y.shape[1]
    n_h = params.n_hidden
    start = L - T

    H = np.zeros((L + 1, B, n_h))  # H[t+1] = h_t, H[0] = zeros
    A = np.zeros((L, B, n_h))
    Xp = np.concatenate([np.zeros((B, 1, n_x)), X[:, :-1]], axis=1)
    for t in range(L):
        A[t] = X[:, t] @ params.U_h.T + H[t] @ params.W_h.T + Xp[:, t] @ params.P_2.T + params.b_h
        H[t + 1] = np.maximum(A[t], 0.0)

    out = np.empty((B, T, params.n_out))
    for j in range(T):
        t = start + j
        out[:, j] = H[t + 1] @ params.W_y.T + H[t] @ params.P_1.T + X[:, t] @ params.P_3.T + params.b_y
    err = out - Y
    n = err.size
    loss = float(np.sum(err**2) / n)
    dout = 2.0 * err / n

    g = {k: np.zeros_like(v) for k, v in params.arrays().items()}
    dh_next = np.zeros((B, n_h))  # gradient reaching h_t from step t+1
    for t in range(L - 1, -1, -1):
        dh = dh_next
        if t >= start:
            dy = dout[:, t - start]
            g["W_y"] += dy.T @ H[t + 1]
            g["P_1"] += dy.T @ H[t]
            g["P_3"] += dy.T @ X[:, t]
            g["b_y"] += dy.sum(axis=0)
            dh = dh + dy @ params.W_y
            dh_prev_y = dy @ params.P_1
        else:
            dh_prev_y = 0.0
        da = dh * (A[t] > 0)
        g["U_h"] += da.T @ X[:, t]
        g["W_h"] += da.T @ H[t]
        g["P_2"] += da.T @ Xp[:, t]
        g["b_h"] += da.sum(axis=0)
        dh_next = da @ params.W_h + dh_prev_y
    return loss, g


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class WindowSource(Protocol):
    def size(self, split: str) -> int: ...

    def get(self, split: str, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


@dataclass
class ArrayWindows:
    """In-memory windows keyed by split name: ``{split: (X, Y)}``."""

    data: dict[str, tuple[np.ndarray, np.ndarray]]

    def size(self, split: str) -> int:
        return self.data[split][0].shape[0]

    def get(self, split: str, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X, Y = self.data[split]
        return X[idx], Y[idx]


@dataclass
class TrainConfig:
    lr: float = 3e-3
    batch: int = 64
    max_epochs: int = 150
    patience: int = 10
    n_hidden: int = 60
    seed: int = 0
    clip: float = 5.0
    max_train_batches: int | None = None  # cap per epoch for very large sets


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1


def _eval_loss(params: IcrnnParams, src: WindowSource, split: str, batch: int = 512) -> float:
    n = src.size(split)
    total = 0.0
    for i in range(0, n, batch):
        idx = np.arange(i, min(n, i + batch))
        X, Y = src.get(split, idx)
        pred = icrnn_forward(params, X, Y.shape[1])
        total += float(np.sum((pred - Y) ** 2))
        count_per = Y[0].size
    return total / (n * count_per)


def train_icrnn(src: WindowSource, n_in: int, n_out: int, config: TrainConfig = TrainConfig(),
                window: int = 36, init: IcrnnParams | None = None) -> tuple[IcrnnParams, TrainHistory]:
    """Adam on the multi-step MSE with a nonnegativity projection after every update.

    Returns the parameters of the epoch with the lowest validation loss.
    Training stops once ``patience`` consecutive epochs fail to improve it.
    """
    if src.size("train") == 0 or src.size("val") == 0:
        raise ValueError("training and validation splits must be nonempty")
    rng = np.random.default_rng(config.seed)
    params = project_nonneg(init or IcrnnParams.init(n_in, config.n_hidden, n_out, seed=config.seed, window=window))
    m = {k: np.zeros_like(v) for k, v in params.arrays().items()}
    v = {k: np.zeros_like(a) for k, a in params.arrays().items()}
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0
    hist = TrainHistory()
    best = (np.inf, params.copy())
    since_best = 0
    n = src.size("train")
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        batches = [order[i:i + config.batch] for i in range(0, n, config.batch)]
        if config.max_train_batches:
            batches = batches[: config.max_train_batches]
        running = 0.0
        for idx in batches:
            X, Y = src.get("train", np.sort(idx))
            loss, grads = loss_and_grad(params, X, Y)
            if not np.isfinite(loss):
                raise Diverged(f"non-finite training loss at epoch {epoch}")
            running += loss
            norm = np.sqrt(sum(float(np.sum(gr**2)) for gr in grads.values()))
            if norm > config.clip:
                grads = {k: gr * (config.clip / norm) for k, gr in grads.items()}
            step += 1
            for k in NAMES:
                m[k] = b1 * m[k] + (1 - b1) * grads[k]
                v[k] = b2 * v[k] + (1 - b2) * grads[k] ** 2
                mh = m[k] / (1 - b1**step)
                vh = v[k] / (1 - b2**step)
                getattr(params, k)[...] -= config.lr * mh / (np.sqrt(vh) + eps)
            params = project_nonneg(params)
        hist.train_loss.append(running / len(batches))
        val = _eval_loss(params, src, "val")
        if not np.isfinite(val):
            raise Diverged(f"non-finite validation loss at epoch {epoch}")
        hist.val_loss.append(val)
        log.debug("epoch %d train %.5f val %.5f", epoch, hist.train_loss[-1], val)
        if val < best[0]:
            best = (val, params.copy())
            hist.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best > config.patience:
                break
    return best[1], hist


def save_params(params: IcrnnParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params.to_json()))


def load_params(path: str | Path) -> IcrnnParams:
    return IcrnnParams.from_json(json.loads(Path(path).read_text()))
