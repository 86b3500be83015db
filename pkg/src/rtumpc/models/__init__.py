from .arx import ArxParams, SingularDesign, fit_arx, predict_arx
from .dataset import HORIZON, PAST_STEPS, Dataset, Window
from .evaluate import RmseReport, evaluate_rmse
from .icrnn import (
    Diverged,
    IcrnnParams,
    ShapeMismatch,
    TrainConfig,
    icrnn_forward,
    loss_and_grad,
    project_nonneg,
    train_icrnn,
)
from .scaling import ScalerParams
from .thermal import ArxModel, IcrnnModel, MeanPredictor, load_model, save_model

__all__ = [
    "ArxModel", "ArxParams", "Dataset", "Diverged", "HORIZON", "IcrnnModel", "IcrnnParams",
    "MeanPredictor", "PAST_STEPS", "RmseReport", "ScalerParams", "ShapeMismatch", "SingularDesign",
    "TrainConfig", "Window", "evaluate_rmse", "fit_arx", "icrnn_forward", "load_model", "loss_and_grad",
    "predict_arx", "project_nonneg", "save_model", "train_icrnn",
]
