from __future__ import annotations

import numpy as np
import pytest

from rtumpc.harness import Scenario, run, run_with_benchmark
from rtumpc.models import ArxModel, Dataset, IcrnnModel, MeanPredictor, TrainConfig
from rtumpc.plant import RcNetwork, generate_dataset


@pytest.fixture(scope="session")
def month_traj():
    return generate_dataset(RcNetwork(), months=1, seed=0)


@pytest.fixture(scope="session")
def month_dataset(month_traj):
    return Dataset(month_traj, seed=0)


@pytest.fixture(scope="session")
def trained(month_dataset):
    model, hist = IcrnnModel.fit(month_dataset, TrainConfig())
    return model, hist


@pytest.fixture(scope="session")
def icrnn_model(trained):
    return trained[0]


@pytest.fixture(scope="session")
def arx_model(month_dataset):
    return ArxModel.fit(month_dataset)


@pytest.fixture(scope="session")
def mean_model(month_dataset):
    return MeanPredictor.fit(month_dataset)


# closed-loop runs shared by the acceptance and harness tests


@pytest.fixture(scope="session")
def greedy_flat():
    return run(Scenario(controller="greedy"))


@pytest.fixture(scope="session")
def convex_flat(icrnn_model):
    return run(Scenario(controller="convex"), icrnn_model)


@pytest.fixture(scope="session")
def convex_bidding(icrnn_model):
    return run_with_benchmark(Scenario(controller="convex", program="bidding"), icrnn_model)


@pytest.fixture(scope="session")
def convex_cpr(icrnn_model):
    return run(Scenario(controller="convex", program="cpr"), icrnn_model)
