import logging

import numpy as np
import pytest

from stabletree.datasets import (
    available_datasets,
    dataset_path,
    get_dataset,
    get_entry,
    list_datasets,
)
from stabletree.errors import DatasetError
from stabletree.evaluation import ExperimentConfig, run_main
from stabletree.utils import data_dir, default_grid

NAMES = ["california", "boston", "carseats", "college", "hitters", "wage"]


def test_registered_names():
    assert [entry.name for entry in list_datasets()] == NAMES


@pytest.mark.parametrize(
    "name, shape",
    [
        ("california", (20640, 8)),
        ("boston", (506, 13)),
        ("carseats", (400, 11)),
        ("college", (777, 17)),
        ("hitters", (263, 19)),
        ("wage", (3000, 16)),
    ],
)
def test_expected_shapes(name, shape):
    assert get_entry(name).expected_shape == shape


def test_unknown_dataset():
    with pytest.raises(DatasetError, match="registered: california"):
        get_entry("iris")


def test_missing_files(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        assert available_datasets(tmp_path) == []
    assert "boston" in caplog.text
    with pytest.raises(DatasetError, match="fetch_datasets"):
        get_dataset("boston", tmp_path)


def test_dimension_check(tmp_path):
    dataset_path("boston", tmp_path).write_text("crim,medv\n0.1,24\n0.2,21.6\n")
    with pytest.raises(DatasetError, match="expected 506 x 13"):
        get_dataset("boston", tmp_path)
    data = get_dataset("boston", tmp_path, verify=False)
    assert data.shape == (2, 1)
    assert data.name == "boston"
    assert available_datasets(tmp_path) == ["boston"]


def fetched(name):
    if not dataset_path(name).exists():
        pytest.skip(f"{name} not fetched under {data_dir()}")
    return get_dataset(name)


@pytest.mark.parametrize("name", NAMES)
def test_fetched_dataset_dimensions(name):
    data = fetched(name)
    assert data.shape == get_entry(name).expected_shape


@pytest.mark.asyncio
@pytest.mark.parametrize("name", ["boston", "carseats", "hitters"])
async def test_baseline_is_dominated(name):
    data = fetched(name)
    cfg = ExperimentConfig.desk(dataset=name, grid=default_grid(), folds=5, seed=0)
    report = await run_main(data, cfg, jobs=4)
    assert not report.baseline().pareto


@pytest.mark.asyncio
async def test_instability_falls_with_alpha():
    data = fetched("california")
    rows = np.sort(np.random.default_rng(0).choice(len(data), 4000, replace=False))
    grid = [(0.0, 0.0), (0.4, 0.0), (1.0, 0.0), (2.0, 0.0)]
    cfg = ExperimentConfig(dataset="california", grid=grid, folds=5, repeats=2, seed=0)
    report = await run_main(data.subset(rows), cfg, jobs=4)
    assert len(report.runs) == 10
    instabilities = [report.trajectory(alpha, beta)[0].instability for alpha, beta in grid]
    assert all(b < a for a, b in zip(instabilities, instabilities[1:]))
