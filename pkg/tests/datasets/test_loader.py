import numpy as np
import pytest

from stabletree.datasets import Dataset, encode_like, load_csv, preprocess
from stabletree.errors import ArityError, DataError, InputValidationError


def test_load_toy(toy_csv):
    raw = load_csv(toy_csv, "y")
    assert raw.n_rows == 8
    assert raw.columns("numeric") == ["x1", "x2", "y"]
    assert raw.columns("categorical") == ["color"]
    assert raw.name == "toy"


def test_preprocess_one_hot(toy_csv):
    data = preprocess(load_csv(toy_csv, "y"))
    assert data.shape == (8, 5)
    assert data.feature_names == ["x1", "x2", "color_blue", "color_green", "color_red"]
    assert list(data.X[0]) == [1.0, 10.0, 0.0, 0.0, 1.0]
    assert data.y[4] == 5.0
    assert data.target_name == "y"

    dropped = preprocess(load_csv(toy_csv, "y"), drop_first=True)
    assert dropped.feature_names == ["x1", "x2", "color_green", "color_red"]
    assert list(dropped.X[1]) == [2.0, 20.0, 0.0, 0.0]


def test_incomplete_rows_are_dropped(tmp_path):
    path = tmp_path / "gaps.csv"
    path.write_text("a,b,y\n1,u,1\n2,,2\n,v,3\n4,v,4\n")
    data = preprocess(load_csv(path, "y"))
    assert list(data.y) == [1.0, 4.0]
    assert data.feature_names == ["a", "b_u", "b_v"]


def test_index_and_dropped_columns(tmp_path):
    path = tmp_path / "indexed.csv"
    path.write_text("id,a,leak,y\nr1,1,5,2\nr2,3,6,4\n")
    raw = load_csv(path, "y", index_col="id", drop=["leak"])
    assert list(raw.frame.columns) == ["a", "y"]
    with pytest.raises(DataError):
        load_csv(path, "y", index_col="nope")


@pytest.mark.parametrize(
    "text, line",
    [
        ("a,a,y\n1,2,3\n", 1),
        ("a,b\n1,2\n", 1),
        ("a,y\n1,2\n2,x\n", 1),
    ],
)
def test_malformed_tables(tmp_path, text, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(DataError) as e:
        load_csv(path, "y")
    assert e.value.line == line


def test_forced_numeric_reports_line(tmp_path):
    path = tmp_path / "typed.csv"
    path.write_text("a,y\n1,1\nabc,2\n3,3\n")
    assert load_csv(path, "y").kinds["a"] == "categorical"
    with pytest.raises(DataError) as e:
        load_csv(path, "y", kinds={"a": "numeric"})
    assert e.value.line == 3


def test_missing_and_empty_files(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "absent.csv", "y")
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataError):
        load_csv(empty, "y")


def test_encode_like_fills_absent_levels(tmp_path, toy_csv):
    names = preprocess(load_csv(toy_csv, "y")).feature_names
    path = tmp_path / "one_row.csv"
    path.write_text("x1,x2,color\n1,10,red\n")
    data = encode_like(load_csv(path, None), names)
    assert data.feature_names == names
    assert list(data.X[0]) == [1.0, 10.0, 0.0, 0.0, 1.0]
    assert list(data.y) == [0.0]

    path.write_text("color,x2,x1,y\nblue,20,2,1.5\n")
    data = encode_like(load_csv(path, "y"), names, "y")
    assert list(data.X[0]) == [2.0, 20.0, 1.0, 0.0, 0.0]
    assert list(data.y) == [1.5]


def test_encode_like_rejects_unknown_columns(tmp_path, toy_csv):
    names = preprocess(load_csv(toy_csv, "y")).feature_names
    path = tmp_path / "unseen.csv"
    path.write_text("x1,x2,color\n1,10,purple\n")
    with pytest.raises(ArityError, match="color_purple"):
        encode_like(load_csv(path, None), names)
    path.write_text("x1,color\n1,red\n")
    with pytest.raises(ArityError, match="missing \\['x2'\\]"):
        encode_like(load_csv(path, None), names)


def test_dataset_validation():
    with pytest.raises(ArityError):
        Dataset(np.zeros((3, 2)), np.zeros(2), ["a", "b"])
    with pytest.raises(ArityError):
        Dataset(np.zeros((3, 2)), np.zeros(3), ["a"])
    with pytest.raises(InputValidationError):
        Dataset(np.array([[np.nan]]), np.zeros(1), ["a"])
    with pytest.raises(InputValidationError):
        Dataset(np.zeros((0, 2)), np.zeros(0), ["a", "b"])


def test_select_reorders_columns():
    data = Dataset(np.array([[1.0, 2.0, 3.0]]), np.array([0.0]), ["a", "b", "c"])
    assert list(data.select(["c", "a", "b"]).X[0]) == [3.0, 1.0, 2.0]
    with pytest.raises(ArityError, match="missing \\['d'\\], extra \\['c'\\]"):
        data.select(["a", "b", "d"])
