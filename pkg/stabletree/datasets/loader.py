import re
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd

from stabletree.errors import ArityError, DataError, InputValidationError

ColumnKind = Literal["numeric", "categorical"]


@dataclass
class RawTable:
    """Typed columns as read from a CSV, before encoding."""

    frame: pd.DataFrame
    kinds: dict[str, ColumnKind]
    target: str
    name: str = ""

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    def columns(self, kind: ColumnKind) -> list[str]:
        return [column for column, k in self.kinds.items() if k == kind]


@dataclass
class Dataset:
    """Numeric feature matrix and response vector, ready for the grower."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    target_name: str = "y"
    name: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim == 1:
            self.X = self.X.reshape(-1, 1)
        n, m = self.X.shape
        if n == 0 or m == 0:
            raise InputValidationError(f"Dataset must be non-empty, got {n} x {m}")
        if len(self.y) != n:
            raise ArityError(f"{n} feature rows but {len(self.y)} responses")
        if len(self.feature_names) != m:
            raise ArityError(f"{m} feature columns but {len(self.feature_names)} names")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise InputValidationError("Dataset contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape  # type: ignore

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, rows) -> "Dataset":
        return Dataset(
            self.X[rows], self.y[rows], list(self.feature_names), self.target_name, self.name
        )

    def select(self, feature_names: list[str]) -> "Dataset":
        """Columns reordered to `feature_names`; names missing or extra raise."""
        missing = [name for name in feature_names if name not in self.feature_names]
        extra = [name for name in self.feature_names if name not in feature_names]
        if missing or extra:
            raise ArityError(f"Feature columns differ: missing {missing}, extra {extra}")
        index = [self.feature_names.index(name) for name in feature_names]
        return Dataset(self.X[:, index], self.y, list(feature_names), self.target_name, self.name)


def _line_number(message: str) -> int | None:
    match = re.search(r"line (\d+)", message)
    return int(match.group(1)) if match else None


def load_csv(
    path: Path | str,
    target_name: str | None,
    index_col: str | None = None,
    drop: list[str] | None = None,
    kinds: dict[str, ColumnKind] | None = None,
) -> RawTable:
    """Read a headed CSV; a column is numeric iff every non-missing cell parses.

    `target_name=None` reads feature-only inputs, e.g. rows to predict.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"No such file: {path}")
    try:
        header = pd.read_csv(path, nrows=1, header=None, dtype=str, keep_default_na=False)
        names = [name.strip() for name in header.iloc[0]]
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path} is empty", line=1)
    except pd.errors.ParserError as e:
        raise DataError(f"Cannot parse {path}: {e}", line=_line_number(str(e)))
    except UnicodeDecodeError as e:
        raise DataError(f"{path} is not UTF-8 text: {e.reason}")
    duplicated = sorted({name for name in names if names.count(name) > 1})
    if duplicated:
        raise DataError(f"Duplicate column names {duplicated}", line=1)

    if index_col is not None:
        if index_col not in frame.columns:
            raise DataError(f"Index column {index_col!r} not in {path}", line=1)
        frame = frame.drop(columns=[index_col])
    frame = frame.drop(columns=[c for c in (drop or []) if c in frame.columns])
    if target_name is not None and target_name not in frame.columns:
        raise DataError(f"Target column {target_name!r} not in {path}", line=1)

    kinds = dict(kinds or {})
    typed = {}
    for column in frame.columns:
        values = frame[column]
        numeric = pd.to_numeric(values, errors="coerce")
        parses = numeric.notna() | values.isna()
        kind = kinds.get(column) or ("numeric" if parses.all() else "categorical")
        if kind == "numeric" and not parses.all():
            bad = int(np.flatnonzero(~parses.to_numpy())[0])
            raise DataError(
                f"Column {column!r} is not numeric: {values.iloc[bad]!r}", line=bad + 2
            )
        typed[column] = numeric if kind == "numeric" else values
        kinds[column] = kind
    if target_name is not None and kinds[target_name] != "numeric":
        raise DataError(f"Target column {target_name!r} is not numeric", line=1)
    return RawTable(
        frame=pd.DataFrame(typed, index=frame.index),
        kinds={c: kinds[c] for c in frame.columns},
        target=target_name or "",
        name=path.stem,
    )


def _complete_rows(raw: RawTable) -> pd.DataFrame:
    frame = raw.frame.dropna(axis=0, how="any")
    if len(frame) == 0:
        raise DataError("No rows left after removing missing values")
    return frame


def _encode(
    raw: RawTable, frame: pd.DataFrame, target: str, drop_first: bool
) -> tuple[dict[str, pd.Series], dict[str, str]]:
    """Feature columns, plus indicator name -> source column for categoricals."""
    columns: dict[str, pd.Series] = {}
    indicators: dict[str, str] = {}
    for column in frame.columns:
        if column == target:
            continue
        if raw.kinds[column] == "numeric":
            columns[column] = frame[column].astype(np.float64)
            continue
        levels = sorted(frame[column].unique())
        if drop_first:
            levels = levels[1:]
        for level in levels:
            name = f"{column}_{level}"
            columns[name] = (frame[column] == level).astype(np.float64)
            indicators[name] = column
    return columns, indicators


def preprocess(raw: RawTable, target: str | None = None, drop_first: bool = False) -> Dataset:
    """Drop incomplete rows, then one-hot encode categoricals in place.

    Levels are ordered lexicographically and named `<column>_<level>`;
    `drop_first` removes the first level of each categorical column.
    """
    target = target or raw.target
    if target not in raw.frame.columns or raw.kinds.get(target) != "numeric":
        raise DataError(f"Target column {target!r} missing or not numeric")
    frame = _complete_rows(raw)
    columns, _ = _encode(raw, frame, target, drop_first)
    if not columns:
        raise DataError("No feature columns left after preprocessing")
    features = pd.DataFrame(columns, index=frame.index)
    return Dataset(
        X=features.to_numpy(dtype=np.float64),
        y=frame[target].to_numpy(dtype=np.float64),
        feature_names=list(features.columns),
        target_name=target,
        name=raw.name,
    )


def encode_like(raw: RawTable, feature_names: list[str], target: str | None = None) -> Dataset:
    """Encode rows onto the columns of an existing model.

    A level the rows happen not to contain becomes an all-zero indicator;
    a level outside `feature_names` raises. Without a target, y is zero.
    """
    target = target or raw.target or None
    if target is not None and raw.kinds.get(target) != "numeric":
        raise DataError(f"Target column {target!r} missing or not numeric")
    frame = _complete_rows(raw)
    columns, indicators = _encode(raw, frame, target or "", drop_first=False)
    unseen = [name for name in indicators if name not in feature_names]
    if unseen:
        raise ArityError(f"Categorical levels unknown to the model: {unseen}")
    categorical = raw.columns("categorical")
    for name in feature_names:
        if name not in columns and any(name.startswith(f"{c}_") for c in categorical):
            columns[name] = pd.Series(0.0, index=frame.index)
    extra = [name for name in columns if name not in feature_names]
    missing = [name for name in feature_names if name not in columns]
    if missing or extra:
        raise ArityError(f"Feature columns differ: missing {missing}, extra {extra}")
    features = pd.DataFrame({name: columns[name] for name in feature_names}, index=frame.index)
    y = frame[target] if target is not None else pd.Series(0.0, index=frame.index)
    return Dataset(
        X=features.to_numpy(dtype=np.float64),
        y=y.to_numpy(dtype=np.float64),
        feature_names=list(feature_names),
        target_name=target or "",
        name=raw.name,
    )
