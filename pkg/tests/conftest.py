from pathlib import Path

import numpy as np
import pytest

from stabletree.datasets import Dataset
from stabletree.tree import FitMeta, LeafNode, SplitNode, build_tree


@pytest.fixture
def data_dir():
    return Path("tests/data").resolve()


@pytest.fixture
def toy_csv(data_dir):
    return data_dir / "toy.csv"


@pytest.fixture
def stump_bytes(data_dir):
    return (data_dir / "stump.json").read_bytes()


@pytest.fixture
def meta():
    return FitMeta(loss="squared_error", alpha=0.0, beta=0.0, epsilon=0.01, c=0.0, seed=0)


def leaf(leaf_id: int, weight: float, n_train: int = 1, var_y: float = 0.0, var_w: float = 0.0):
    return LeafNode(
        type="leaf",
        leaf_id=leaf_id,
        weight=weight,
        n_train=n_train,
        response_variance=var_y,
        prediction_variance=var_w,
    )


def split(feature: int, value: float):
    return SplitNode(type="split", feature=feature, value=value)


@pytest.fixture
def stump(meta):
    """x <= 1.0 goes to a leaf with weight 2.0, otherwise 7.0."""
    return build_tree([split(0, 1.0), leaf(1, 2.0), leaf(2, 7.0)], ["x"], meta)


def random_tree(rng: np.random.Generator, n_features: int, max_depth: int, meta: FitMeta):
    nodes = []
    n_leaves = 0

    def add(depth):
        nonlocal n_leaves
        if depth < max_depth and rng.random() < 0.7:
            nodes.append(split(int(rng.integers(n_features)), float(rng.normal())))
            add(depth + 1)
            add(depth + 1)
        else:
            n_leaves += 1
            nodes.append(
                leaf(
                    n_leaves,
                    float(rng.normal()),
                    int(rng.integers(1, 50)),
                    float(rng.exponential()),
                    float(rng.exponential()),
                )
            )

    add(0)
    return build_tree(nodes, [f"x{j}" for j in range(n_features)], meta)


def make_dataset(rng: np.random.Generator, n: int, m: int, signal: bool = True) -> Dataset:
    X = rng.normal(size=(n, m))
    y = rng.normal(size=n)
    if signal:
        y = y + 3.0 * (X[:, 0] > 0) + X[:, 1 % m]
    return Dataset(X, y, [f"x{j}" for j in range(m)], "y", "synthetic")


@pytest.fixture
def regression_data():
    return make_dataset(np.random.default_rng(7), 400, 4)


@pytest.fixture
def leaf_node():
    return leaf


@pytest.fixture
def split_node():
    return split


@pytest.fixture
def tree_factory(meta):
    return lambda rng, n_features=3, max_depth=4: random_tree(rng, n_features, max_depth, meta)


@pytest.fixture
def dataset_factory():
    return make_dataset
