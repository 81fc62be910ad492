import math
import os
from pathlib import Path
from typing import Iterable

import numpy as np
from dotenv import load_dotenv

from stabletree.errors import ArityError, InputValidationError

load_dotenv()


DEFAULT_EPSILON = 0.01
DEFAULT_FOLDS = 5
FULL_REPEATS = 10  # main setup
FULL_REPETITIONS = 50  # varied-n and iterative setups
DESK_REPEATS = 3
DESK_REPETITIONS = 10
ITERATIVE_FOLDS = 7
VARIED_TEST_SIZE = 5000
VARIED_N_VALUES = [1000, 5000, 10000, 15000]

BASELINE = (0.0, 0.0)
# Pareto-efficient trade-offs picked from the California main setup
SELECTED_CONFIGS = [(0.2, 0.6), (0.4, 0.6), (1.0, 1.0), (1.2, 0.4), (2.0, 0.2)]


def default_grid(steps: int = 10, stop: float = 2.0) -> list[tuple[float, float]]:
    """(alpha, beta) pairs on a square grid from 0 to `stop`, baseline first."""
    values = [stop * i / steps for i in range(steps + 1)]
    return [(alpha, beta) for alpha in values for beta in values]


def data_dir() -> Path:
    """Root folder for registry CSVs, `$STABLETREE_DATA_DIR` or ./data."""
    return Path(os.environ.get("STABLETREE_DATA_DIR", Path.cwd() / "data"))


def derive_seed(*keys: int) -> int:
    """Deterministic 32-bit seed from a master seed and run coordinates."""
    sequence = np.random.SeedSequence([int(k) for k in keys])
    return int(sequence.generate_state(1)[0])


def fsum(values: Iterable[float] | np.ndarray) -> float:
    """Exactly rounded sum; independent of row order."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def as_matrix(x, n_features: int) -> np.ndarray:
    """Return x as a finite (n, m) float64 matrix or raise."""
    matrix = np.asarray(x, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.ndim != 2 or matrix.shape[1] != n_features:
        got = matrix.shape[-1] if matrix.ndim else 0
        raise ArityError(f"Expected {n_features} features, got {got}")
    if not np.isfinite(matrix).all():
        raise InputValidationError("Feature values must be finite (NaN/inf given)")
    return matrix
