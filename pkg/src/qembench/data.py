"""Iris loading, stratified splitting and standardization."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

COLUMNS = ("sepal_length", "sepal_width", "petal_length", "petal_width", "species")
CLASS_NAMES = ("setosa", "versicolor", "virginica")
IRIS_URL = "https://raw.githubusercontent.com/mwaskom/seaborn-data/master/iris.csv"
# digest of the canonical form (see dataset_digest) of the vendored file
IRIS_DIGEST = "23865f54609c9eb7e9c3ea0c301908714b5525346f2f0dbd547807db58624718"


class Reduction(str, enum.Enum):
    TRUNCATE3 = "truncate3"
    TRAINABLE_COMPRESS = "trainable_compress"


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    features: np.ndarray  # (n, 4)
    labels: np.ndarray
    class_names: tuple[str, ...] = CLASS_NAMES


def default_iris_path() -> Path:
    return Path(str(resources.files("qembench") / "data" / "iris.csv"))


def _species(name: str) -> str:
    name = name.strip().strip('"').lower()
    return name[5:] if name.startswith("iris-") else name


def parse_iris(text: str, source: str = "<string>") -> Dataset:
    """Parse Iris CSV text; a header row is optional."""
    feats, labels = [], []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 5:
            raise DataError(
                f"{source}:{lineno}: expected 5 columns ({','.join(COLUMNS)}), got {len(row)}"
            )
        if lineno == 1 and row[0].strip().lower().replace(".", "_") in ("sepal_length", "sepallength"):
            continue
        try:
            values = [float(c) for c in row[:4]]
        except ValueError:
            raise DataError(f"{source}:{lineno}: non-numeric feature in {row[:4]}") from None
        if not np.all(np.isfinite(values)):
            raise DataError(f"{source}:{lineno}: missing or non-finite feature value")
        species = _species(row[4])
        if species not in CLASS_NAMES:
            raise DataError(f"{source}:{lineno}: unknown species {row[4]!r}")
        feats.append(values)
        labels.append(CLASS_NAMES.index(species))
    if not feats:
        raise DataError(f"{source}: no data rows")
    return Dataset(np.array(feats), np.array(labels, dtype=int))


def load_iris(path: str | Path | None = None) -> Dataset:
    """Read the Iris CSV; the vendored copy is used when ``path`` is None."""
    path = Path(path) if path is not None else default_iris_path()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return parse_iris(text, str(path))


def dataset_digest(ds: Dataset) -> str:
    """SHA-256 of a formatting-independent rendering of the rows."""
    lines = [",".join(f"{v:.4f}" for v in f) + f",{y}" for f, y in zip(ds.features, ds.labels)]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


@dataclass
class SplitDataset:
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    mean: np.ndarray  # training-split statistics, all 4 raw columns
    std: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    reduction: Reduction = Reduction.TRUNCATE3
    seed: int = 0

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "reduction": self.reduction.value,
            "train": self.train_idx.tolist(),
            "validation": self.val_idx.tolist(),
            "scaler_fit_on": "train",
        }

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), indent=1)

    def inverse_standardize(self, z: np.ndarray) -> np.ndarray:
        """Map standardized columns back to raw units (columns as in ``train_x``)."""
        k = z.shape[1]
        return z * self.std[:k] + self.mean[:k]


def prepare(ds: Dataset, seed: int = 0, reduction: Reduction | str = Reduction.TRUNCATE3,
            val_fraction: float = 0.25) -> SplitDataset:
    """Stratified split, then standardize with statistics from the training rows.

    ``TRUNCATE3`` keeps the first three standardized columns (petal width is
    dropped); ``TRAINABLE_COMPRESS`` keeps all four for a learned pre-layer.
    """
    reduction = Reduction(reduction)
    idx = np.arange(len(ds.labels))
    train_idx, val_idx = train_test_split(
        idx, test_size=val_fraction, stratify=ds.labels, random_state=seed, shuffle=True
    )
    scaler = StandardScaler().fit(ds.features[train_idx])
    tr = scaler.transform(ds.features[train_idx])
    va = scaler.transform(ds.features[val_idx])
    if reduction is Reduction.TRUNCATE3:
        tr, va = tr[:, :3], va[:, :3]
    return SplitDataset(
        tr, ds.labels[train_idx], va, ds.labels[val_idx],
        scaler.mean_.copy(), scaler.scale_.copy(), train_idx, val_idx, reduction, seed,
    )


def split_from_manifest(ds: Dataset, manifest: dict) -> SplitDataset:
    """Rebuild a split exactly from a stored manifest."""
    train_idx = np.asarray(manifest["train"], dtype=int)
    val_idx = np.asarray(manifest["validation"], dtype=int)
    reduction = Reduction(manifest.get("reduction", "truncate3"))
    scaler = StandardScaler().fit(ds.features[train_idx])
    tr = scaler.transform(ds.features[train_idx])
    va = scaler.transform(ds.features[val_idx])
    if reduction is Reduction.TRUNCATE3:
        tr, va = tr[:, :3], va[:, :3]
    return SplitDataset(tr, ds.labels[train_idx], va, ds.labels[val_idx], scaler.mean_.copy(),
                        scaler.scale_.copy(), train_idx, val_idx, reduction, int(manifest.get("seed", 0)))


def fetch_iris(dest: str | Path, url: str = IRIS_URL, timeout: float = 30.0) -> Dataset:
    """Download the Iris CSV, check it against the vendored content, save it.

    Raises:
        DataError: on network failure or content mismatch.
    """
    import urllib.request

    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            text = resp.read().decode("utf-8")
    except OSError as exc:
        raise DataError(f"download failed from {url}: {exc}") from exc
    ds = parse_iris(text, url)
    digest = dataset_digest(ds)
    if digest != IRIS_DIGEST:
        raise DataError(f"content checksum mismatch for {url}: {digest}")
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(text, encoding="utf-8")
    return ds
