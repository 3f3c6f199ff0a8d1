import json

import numpy as np
import pytest
from sklearn.preprocessing import StandardScaler

from qembench.data import (
    CLASS_NAMES,
    IRIS_DIGEST,
    DataError,
    Reduction,
    dataset_digest,
    load_iris,
    parse_iris,
    prepare,
    split_from_manifest,
)


@pytest.fixture(scope="module")
def iris():
    return load_iris()


def test_vendored_iris(iris):
    assert iris.features.shape == (150, 4)
    assert np.bincount(iris.labels).tolist() == [50, 50, 50]
    assert dataset_digest(iris) == IRIS_DIGEST


def test_first_row(iris):
    assert np.array_equal(iris.features[0], [5.1, 3.5, 1.4, 0.2])
    assert iris.labels[0] == 0
    ds = parse_iris("5.1,3.5,1.4,0.2,setosa\n")
    assert np.array_equal(ds.features[0], [5.1, 3.5, 1.4, 0.2]) and ds.labels[0] == 0


def test_header_and_prefix_optional():
    a = parse_iris("sepal_length,sepal_width,petal_length,petal_width,species\n1,2,3,4,virginica\n")
    b = parse_iris("1,2,3,4,Iris-virginica\n")
    assert np.array_equal(a.features, b.features) and a.labels[0] == b.labels[0] == 2


def test_wrong_column_count(tmp_path):
    f = tmp_path / "three.csv"
    f.write_text("1,2,setosa\n")
    with pytest.raises(DataError) as err:
        load_iris(f)
    msg = str(err.value)
    assert "three.csv" in msg and "sepal_length" in msg and "species" in msg


def test_malformed_row_line_number():
    text = "5.1,3.5,1.4,0.2,setosa\n4.9,abc,1.4,0.2,setosa\n"
    with pytest.raises(DataError, match=":2:"):
        parse_iris(text, "x.csv")
    with pytest.raises(DataError, match=":1:.*species"):
        parse_iris("1,2,3,4,rose\n")
    with pytest.raises(DataError):
        parse_iris("1,nan,3,4,setosa\n")
    with pytest.raises(DataError):
        parse_iris("")


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        load_iris(tmp_path / "absent.csv")


def test_label_bijection():
    text = "".join(f"1,1,1,1,{name}\n" for name in CLASS_NAMES)
    assert parse_iris(text).labels.tolist() == [0, 1, 2]
    assert sorted(CLASS_NAMES) == list(CLASS_NAMES)


def test_split_sizes(iris):
    s = prepare(iris, 0)
    assert len(s.train_y) == 112 and len(s.val_y) == 38
    assert sorted(np.bincount(s.val_y).tolist()) == [12, 13, 13]
    assert sorted(np.bincount(s.train_y).tolist()) == [37, 37, 38]
    assert len(set(s.train_idx) | set(s.val_idx)) == 150


def test_split_deterministic(iris):
    a, b = prepare(iris, 3), prepare(iris, 3)
    assert np.array_equal(a.train_idx, b.train_idx) and np.array_equal(a.train_x, b.train_x)
    assert not np.array_equal(prepare(iris, 4).train_idx, a.train_idx)


def test_standardized_train_columns(iris):
    s = prepare(iris, 0, Reduction.TRAINABLE_COMPRESS)
    assert np.abs(s.train_x.mean(axis=0)).max() < 1e-9
    assert np.abs(s.train_x.std(axis=0) - 1).max() < 1e-9


def test_truncate_drops_petal_width(iris):
    full = prepare(iris, 0, "trainable_compress")
    s = prepare(iris, 0)
    assert s.train_x.shape[1] == 3
    assert np.array_equal(s.train_x, full.train_x[:, :3])


def test_round_trip(iris):
    s = prepare(iris, 0)
    assert np.abs(s.inverse_standardize(s.train_x) - iris.features[s.train_idx, :3]).max() < 1e-10


def test_scaler_fit_on_train_only(iris):
    s = prepare(iris, 0)
    everything = StandardScaler().fit(iris.features)
    assert not np.allclose(everything.mean_, s.mean)
    assert np.allclose(StandardScaler().fit(iris.features[s.train_idx]).mean_, s.mean)
    assert np.abs(s.val_x.mean(axis=0)).max() > 1e-6


def test_manifest_round_trip(iris):
    s = prepare(iris, 5, "trainable_compress")
    doc = json.loads(s.manifest_json())
    assert doc["scaler_fit_on"] == "train"
    r = split_from_manifest(iris, doc)
    assert r.reduction is Reduction.TRAINABLE_COMPRESS and r.seed == 5
    for name in ("train_x", "train_y", "val_x", "val_y", "mean", "std"):
        assert np.array_equal(getattr(r, name), getattr(s, name))
