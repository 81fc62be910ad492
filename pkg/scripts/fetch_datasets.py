"""Download the registered datasets into the data directory.

Usage: python scripts/fetch_datasets.py [--data-dir DIR] [names ...]

The ISLR and MASS tables come from the Rdatasets mirror; California housing
comes from scikit-learn (install the `fetch` extra).
"""

import argparse
from pathlib import Path

import pandas as pd

from stabletree.datasets import get_dataset, get_entry, list_datasets
from stabletree.errors import StabletreeError
from stabletree.utils import data_dir

RDATASETS = "https://vincentarelbundock.github.io/Rdatasets/csv"
SOURCES = {
    "boston": f"{RDATASETS}/MASS/Boston.csv",
    "carseats": f"{RDATASETS}/ISLR/Carseats.csv",
    "college": f"{RDATASETS}/ISLR/College.csv",
    "hitters": f"{RDATASETS}/ISLR/Hitters.csv",
    "wage": f"{RDATASETS}/ISLR/Wage.csv",
}


def fetch_california() -> pd.DataFrame:
    from sklearn.datasets import fetch_california_housing

    return fetch_california_housing(as_frame=True).frame  # type: ignore


def fetch_rdataset(url: str) -> pd.DataFrame:
    frame = pd.read_csv(url)
    # First column holds R row names
    first = str(frame.columns[0])
    if first in ("rownames", "") or first.startswith("Unnamed"):
        frame = frame.drop(columns=[frame.columns[0]])
    return frame


def main():
    parser = argparse.ArgumentParser(description="Fetch benchmark datasets.")
    parser.add_argument("names", nargs="*", help="Datasets to fetch (default all).")
    parser.add_argument("--data-dir", type=Path, default=None, help="Output directory.")
    args = parser.parse_args()
    root = args.data_dir or data_dir()
    root.mkdir(parents=True, exist_ok=True)
    names = args.names or [entry.name for entry in list_datasets()]
    for name in names:
        entry = get_entry(name)
        frame = fetch_california() if name == "california" else fetch_rdataset(SOURCES[name])
        frame.to_csv(root / entry.file, index=False)
        try:
            data = get_dataset(name, root)
            print(f"{name}: {data.shape[0]} x {data.shape[1]} -> {root / entry.file}")
        except StabletreeError as e:
            print(f"{name}: written, but {e}")


if __name__ == "__main__":
    main()
