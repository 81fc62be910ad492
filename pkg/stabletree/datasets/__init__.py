import logging
import tomllib
from dataclasses import dataclass, field
from functools import cache
from pathlib import Path

from stabletree.datasets.folds import half_split, split_folds  # noqa: F401
from stabletree.datasets.loader import (  # noqa: F401
    Dataset,
    RawTable,
    encode_like,
    load_csv,
    preprocess,
)
from stabletree.errors import DatasetError
from stabletree.utils import data_dir

REGISTRY_PATH = Path(__file__).parent / "registry.toml"


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    file: str
    target: str
    n: int
    m: int
    drop: list[str] = field(default_factory=list)
    index_col: str | None = None
    drop_first: bool = False
    count_target: bool = False

    @property
    def expected_shape(self) -> tuple[int, int]:
        return self.n, self.m - 1 if self.count_target else self.m


@cache
def _registry() -> dict[str, DatasetEntry]:
    with open(REGISTRY_PATH, "rb") as f:
        manifest = tomllib.load(f)
    return {name: DatasetEntry(name=name, **entry) for name, entry in manifest.items()}


def list_datasets() -> list[DatasetEntry]:
    return list(_registry().values())


def dataset_path(name: str, root: Path | str | None = None) -> Path:
    return Path(root or data_dir()) / get_entry(name).file


def get_entry(name: str) -> DatasetEntry:
    registry = _registry()
    if name not in registry:
        raise DatasetError(f"Unknown dataset {name!r}; registered: {', '.join(registry)}")
    return registry[name]


def available_datasets(root: Path | str | None = None) -> list[str]:
    available = []
    for entry in list_datasets():
        if dataset_path(entry.name, root).exists():
            available.append(entry.name)
        else:
            logging.warning(f"Dataset {entry.name} not found under {root or data_dir()}")
    return available


def get_dataset(name: str, root: Path | str | None = None, verify: bool = True) -> Dataset:
    """Load and preprocess a registered dataset, checking its dimensions."""
    entry = get_entry(name)
    path = dataset_path(name, root)
    if not path.exists():
        raise DatasetError(
            f"Dataset file {path} is missing; run scripts/fetch_datasets.py"
        )
    raw = load_csv(path, entry.target, index_col=entry.index_col, drop=entry.drop)
    data = preprocess(raw, entry.target, drop_first=entry.drop_first)
    data.name = name
    if verify and data.shape != entry.expected_shape:
        raise DatasetError(
            f"{name} preprocesses to {data.shape[0]} x {data.shape[1]}, "
            f"expected {entry.expected_shape[0]} x {entry.expected_shape[1]}"
        )
    return data
