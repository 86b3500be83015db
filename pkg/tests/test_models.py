import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtumpc.core import LADDER
from rtumpc.models import (
    ArxModel,
    ArxParams,
    Dataset,
    IcrnnModel,
    IcrnnParams,
    ScalerParams,
    ShapeMismatch,
    SingularDesign,
    TrainConfig,
    evaluate_rmse,
    fit_arx,
    icrnn_forward,
    load_model,
    predict_arx,
    project_nonneg,
    save_model,
    train_icrnn,
)
from rtumpc.models.arx import design_row, n_features
from rtumpc.models.icrnn import ArrayWindows, Diverged, load_params, save_params
from rtumpc.models.thermal import bits_of, raw_features
from rtumpc.plant import RcNetwork, generate_dataset

# --- scaling -------------------------------------------------------------


@given(st.integers(0, 2**31 - 1))
def test_scaler_round_trip(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(50, 4)) * rng.uniform(0.1, 100, 4)
    sc = ScalerParams.fit(x)
    assert np.allclose(sc.unscale(sc.scale(x)), x, atol=1e-12 * np.abs(x).max(), rtol=0)


def test_scaler_fixed_columns_and_constants():
    x = np.array([[1.0, 5.0, 0.0], [3.0, 5.0, 1.0]])
    sc = ScalerParams.fit(x, fixed={2: (0.0, 2.0)})
    assert sc.scale(x)[:, 2].tolist() == [0.0, 0.5]
    assert np.all(np.isfinite(sc.scale(x)))
    with pytest.raises(ValueError):
        ScalerParams(np.array([1.0]), np.array([1.0]))
    back = ScalerParams.from_json(sc.to_json())
    assert np.array_equal(back.lo, sc.lo) and np.array_equal(back.hi, sc.hi)


# --- dataset -------------------------------------------------------------


def test_splits_disjoint_and_cover(month_dataset):
    tr, va, te = (set(month_dataset.anchors(s).tolist()) for s in ("train", "val", "test"))
    assert not (tr & va or tr & te or va & te)
    n = len(tr) + len(va) + len(te)
    assert len(tr) / n == pytest.approx(0.6, abs=1e-3)


def test_window_alignment(month_dataset):
    a = month_dataset.anchors("test")[:3]
    w = month_dataset.window(a)
    t = month_dataset.traj
    assert w.past_exo.shape == (3, 36, 6) and w.target.shape == (3, 24, 2)
    assert np.array_equal(w.target[0, 0], t.dtheta[a[0]])
    assert np.array_equal(w.past_dtheta[0, -1], t.dtheta[a[0] - 1])
    assert np.allclose(w.theta_prev[0], t.theta[a[0] - 1])


# --- ICRNN ---------------------------------------------------------------


def test_zero_weights_give_constant_output():
    p = IcrnnParams.init(5, 4, 2, seed=0, window=3)
    for k in ("U_h", "W_h", "P_2", "W_y", "P_1", "P_3"):
        getattr(p, k)[...] = 0
    p.b_y[:] = [0.7, -1.2]
    y = icrnn_forward(p, np.random.default_rng(0).normal(size=(7, 5)))
    assert y.shape == (4, 2)
    assert np.all(y == np.array([0.7, -1.2]))


def test_forward_shape_mismatch():
    p = IcrnnParams.init(5, 4, 2, window=3)
    with pytest.raises(ShapeMismatch):
        icrnn_forward(p, np.zeros((7, 4)))
    with pytest.raises(ShapeMismatch):
        icrnn_forward(p, np.zeros((3, 5)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_random_nonneg_params_are_convex(seed):
    rng = np.random.default_rng(seed)
    p = IcrnnParams.init(4, 6, 2, seed=seed, window=3)
    x, y = rng.normal(size=(2, 8, 4))
    lam = rng.uniform()
    lhs = icrnn_forward(p, lam * x + (1 - lam) * y)
    rhs = lam * icrnn_forward(p, x) + (1 - lam) * icrnn_forward(p, y)
    assert np.all(lhs <= rhs + 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 7), st.integers(0, 3))
def test_outputs_nondecreasing_in_each_input(seed, step, col):
    rng = np.random.default_rng(seed)
    p = IcrnnParams.init(4, 6, 2, seed=seed, window=3)
    x = rng.normal(size=(8, 4))
    bumped = x.copy()
    bumped[step, col] += 0.1
    assert np.all(icrnn_forward(p, bumped) >= icrnn_forward(p, x) - 1e-9)


def test_projection():
    p = IcrnnParams.init(3, 3, 1, seed=1)
    p.U_h[0, 0] = -0.3
    p.b_h[0] = -0.3
    q = project_nonneg(p)
    assert q.U_h[0, 0] == 0.0 and q.b_h[0] == -0.3
    assert q.is_nonneg()
    r = project_nonneg(q)
    assert all(np.array_equal(a, b) for a, b in zip(q.arrays().values(), r.arrays().values()))
    clean = IcrnnParams.init(3, 3, 1, seed=2)
    assert all(np.array_equal(a, b) for a, b in zip(clean.arrays().values(), project_nonneg(clean).arrays().values()))


def test_params_json_round_trip(tmp_path):
    p = IcrnnParams.init(4, 5, 2, seed=3, window=7)
    save_params(p, tmp_path / "w.json")
    q = load_params(tmp_path / "w.json")
    assert q.window == 7
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays().values(), q.arrays().values()))
    data = json.loads((tmp_path / "w.json").read_text())
    data["version"] = 99
    with pytest.raises(ValueError):
        IcrnnParams.from_json(data)


def _teacher_windows(seed=0, n=600, L=10, T=4):
    rng = np.random.default_rng(seed)
    teacher = IcrnnParams.init(3, 5, 1, seed=seed + 100, window=L - T)
    X = rng.uniform(0, 1, size=(n, L, 3))
    Y = icrnn_forward(teacher, X, T)
    cut = int(0.8 * n)
    return ArrayWindows({"train": (X[:cut], Y[:cut]), "val": (X[cut:], Y[cut:])}), Y


def test_student_learns_convex_teacher():
    src, Y = _teacher_windows()
    params, hist = train_icrnn(src, 3, 1, TrainConfig(lr=1e-2, batch=32, max_epochs=60, patience=10, n_hidden=10),
                               window=6)
    Xv, Yv = src.get("val", np.arange(src.size("val")))
    rmse = np.sqrt(np.mean((icrnn_forward(params, Xv, 4) - Yv) ** 2))
    assert rmse < 0.1 * Y.std()
    assert params.is_nonneg()


def test_patience_zero_stops_after_first_non_improvement():
    src, _ = _teacher_windows(n=200)
    _, hist = train_icrnn(src, 3, 1, TrainConfig(lr=0.5, batch=16, max_epochs=50, patience=0, n_hidden=4), window=6)
    assert len(hist.val_loss) == hist.best_epoch + 2 or len(hist.val_loss) == 50


def test_divergence_is_reported():
    src, _ = _teacher_windows(n=100)
    bad = IcrnnParams.init(3, 4, 1, window=6)
    bad.b_y[:] = np.inf
    with pytest.raises(Diverged):
        train_icrnn(src, 3, 1, TrainConfig(max_epochs=2, n_hidden=4), window=6, init=bad)


def test_training_history_on_default_data(trained):
    model, hist = trained
    assert hist.train_loss[4] < hist.train_loss[0]
    assert model.params.is_nonneg()
    assert hist.best_epoch == int(np.argmin(hist.val_loss))


def test_icrnn_model_round_trip(icrnn_model, month_dataset, tmp_path):
    save_model(icrnn_model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    w = month_dataset.window(month_dataset.anchors("test")[:5])
    assert np.array_equal(back.predict(w), icrnn_model.predict(w))


def test_context_rollout_matches_predict(icrnn_model, month_dataset):
    w = month_dataset.window(month_dataset.anchors("test")[:1])
    ctx = icrnn_model.context(w.past_exo[0], w.past_codes[0])
    roll = icrnn_model.rollout(ctx, w.fut_exo[0], bits_of(w.fut_codes))
    assert np.allclose(roll, icrnn_model.predict(w), atol=1e-12)


def test_raw_features_layout():
    exo = np.arange(6.0)
    f = raw_features(exo, bits_of(np.array([3, 1])))
    assert f.tolist() == [0, 1, 2, 3, 4, 5, 1, 1, 1, 0, 0, 1, -1, -1, -1, 0, 0, -1]


def test_grid_search_trains_every_pair():
    traj = generate_dataset(RcNetwork(), months=0.1, seed=5)
    ds = Dataset(traj, seed=0, stride=4)
    model, table = IcrnnModel.grid_search(ds, [3e-3, 1e-2], [4], TrainConfig(max_epochs=3, patience=1))
    assert len(table) == 2
    assert model.params.n_hidden == 4


# --- ARX -----------------------------------------------------------------


def test_arx_recovers_known_coefficients():
    rng = np.random.default_rng(0)
    n, nz = 4000, 2
    coef = rng.uniform(-0.05, 0.05, size=(n_features(nz), nz))
    coef[10:18] *= 0.5  # keep the lag dynamics stable
    exo = np.column_stack([rng.uniform(20, 32, n), rng.uniform(0, 800, n) / 1000, rng.uniform(-1, 1, (n, 4))])
    codes = rng.integers(0, 4, size=(n, nz))
    dtheta = np.zeros((n, nz))
    for t in range(4, n):
        row = design_row(exo[t], exo[t - 3:t + 1, 1], dtheta[t - 4:t], LADDER[codes[t]])
        dtheta[t] = row @ coef + rng.normal(0, 1e-4, nz)
    fit = fit_arx(exo, codes, dtheta)
    assert np.max(np.abs(fit.coef - coef)) < 1e-2


def test_arx_singular_design():
    n = 50
    exo = np.zeros((n, 6))
    with pytest.raises(SingularDesign):
        fit_arx(exo, np.zeros((n, 1), dtype=int), np.zeros((n, 1)))


def test_arx_one_step_equals_regression(arx_model, month_dataset):
    a = month_dataset.anchors("test")[:4]
    w = month_dataset.window(a)
    one = arx_model.predict(w, horizon=1)[:, 0]
    t = month_dataset.traj
    rows = design_row(t.exogenous[a], t.exogenous[a[:, None] + np.arange(-3, 1), 1],
                      t.dtheta[a[:, None] + np.arange(-4, 0)], LADDER[t.codes[a]])
    assert np.allclose(one, rows @ arx_model.params.coef, atol=1e-12)


def test_arx_error_grows_with_horizon(arx_model, month_dataset):
    rep = evaluate_rmse(arx_model, month_dataset, level="theta")
    assert np.all(rep.by_step[-1] >= rep.by_step[0])


def test_arx_history_too_short():
    p = ArxParams(np.zeros((n_features(1), 1)), 1)
    with pytest.raises(ValueError):
        predict_arx(p, np.zeros((1, 2, 6)), np.zeros((1, 2, 1)), np.zeros((1, 3, 6)), np.zeros((1, 3, 1, 3)))


def test_arx_model_round_trip(arx_model, month_dataset, tmp_path):
    save_model(arx_model, tmp_path / "arx.json")
    back = load_model(tmp_path / "arx.json")
    assert isinstance(back, ArxModel)
    w = month_dataset.window(month_dataset.anchors("test")[:3])
    assert np.array_equal(back.predict(w), arx_model.predict(w))


# --- evaluation ----------------------------------------------------------


class _Oracle:
    kind = "oracle"

    def predict(self, window):
        return window.target.copy()


def test_perfect_predictor_scores_zero(month_dataset):
    assert evaluate_rmse(_Oracle(), month_dataset).overall == 0.0


def test_mean_predictor_rmse_is_target_std(mean_model, month_dataset):
    rep = evaluate_rmse(mean_model, month_dataset)
    test_rows = np.unique(month_dataset.anchors("test")[:, None] + np.arange(24))
    std = month_dataset.traj.dtheta[test_rows].std(axis=0)
    assert np.allclose(rep.mean, std, rtol=0.02)


def test_model_ordering_per_zone(icrnn_model, arx_model, month_dataset):
    assert np.all(evaluate_rmse(icrnn_model, month_dataset).mean < evaluate_rmse(arx_model, month_dataset).mean)
