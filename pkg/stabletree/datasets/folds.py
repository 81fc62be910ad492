import numpy as np

from stabletree.datasets.loader import Dataset
from stabletree.errors import InputValidationError


def split_folds(data: Dataset | int, k: int, repeats: int = 1, seed: int = 0) -> list[list[np.ndarray]]:
    """Row-index folds, one list of k folds per repeat.

    Each repeat permutes the rows with its own generator seeded by
    (seed, repeat) and cuts the permutation into k parts whose sizes differ
    by at most one, larger parts first.
    """
    n = data if isinstance(data, int) else len(data)
    if k < 2:
        raise InputValidationError(f"Need at least 2 folds, got {k}")
    if k > n:
        raise InputValidationError(f"Cannot split {n} rows into {k} folds")
    if repeats < 1:
        raise InputValidationError(f"Need at least 1 repeat, got {repeats}")
    assignments = []
    for repeat in range(repeats):
        permutation = np.random.default_rng([seed, repeat]).permutation(n)
        assignments.append(np.array_split(permutation, k))
    return assignments


def half_split(rows: np.ndarray, seed: int) -> np.ndarray:
    """Seeded half of `rows` without replacement, floor(n / 2) rows."""
    permutation = np.random.default_rng(seed).permutation(len(rows))
    return np.sort(rows[permutation[: len(rows) // 2]])
