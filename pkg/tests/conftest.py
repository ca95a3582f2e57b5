from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import treeopt as t

settings.register_profile(
    "desk", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("desk")

DATA = Path(__file__).resolve().parent.parent / "data"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def iris():
    return t.load_csv(DATA / "iris.csv", "target", "classification")


@pytest.fixture(scope="session")
def balance():
    return t.load_csv(DATA / "balance_scale.csv", "class", "classification")


@pytest.fixture(scope="session")
def wdbc():
    return t.load_csv(DATA / "breast_cancer_wdbc.csv", "target", "classification")


@pytest.fixture(scope="session")
def diabetes():
    return t.load_csv(DATA / "diabetes.csv", "target", "regression")


def blobs(n=40, d=2, seed=0, gap=3.0):
    """Two separable Gaussian blobs, classes 1 and 2."""
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack(
        [rng.normal(0.0, 1.0, (half, d)), rng.normal(gap, 1.0, (n - half, d))]
    )
    y = np.array([1] * half + [2] * (n - half))
    return t.Dataset(X, y, t.Task.classification(2), tuple(f"x{i}" for i in range(d)))


def random_classification(n, d, k, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.integers(1, k + 1, size=n)
    return t.Dataset(X, y, t.Task.classification(k), tuple(f"x{i}" for i in range(d)))


def random_regression(n, d, seed, noise=0.5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X @ rng.normal(size=d) + noise * rng.normal(size=n)).reshape(-1, 1)
    return t.Dataset(X, y, t.Task.regression(1), tuple(f"x{i}" for i in range(d)))
