"""Labeled sample container and its on-disk formats.

CSV: one row per sample, coordinates ``x0..x{d-1}`` then ``y``; a ``#``-prefixed
first line carries the metadata as JSON so a round trip is lossless.

Binary (``.rlds``)::

    magic  b"RLDS"            4 bytes
    version                   uint8 (currently 1)
    header length             uint32, little endian
    header                    UTF-8 JSON {d, m, label_kind, marginal, seed, meta}
    X                         m*d float64, little endian, row major
    y                         m float64, little endian
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LABEL_KINDS = ("real", "boolean")
MARGINALS = ("gaussian", "boolean-cube", "lifted")

_MAGIC = b"RLDS"
_VERSION = 1


@dataclass
class LabeledDataset:
    """Points ``X`` (shape ``(m, d)``) with labels ``y`` (shape ``(m,)``).

    ``label_kind`` is ``"real"`` (labels in [0, 1]) or ``"boolean"`` (labels in
    {-1, +1}); ``marginal`` records where the points came from.
    """

    X: np.ndarray
    y: np.ndarray
    label_kind: str = "real"
    marginal: str = "gaussian"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError(f"y has shape {self.y.shape}, expected ({self.X.shape[0]},)")
        if self.label_kind not in LABEL_KINDS:
            raise ValueError(f"unknown label kind {self.label_kind!r}")
        if self.marginal not in MARGINALS:
            raise ValueError(f"unknown marginal {self.marginal!r}")
        if self.label_kind == "boolean":
            if not np.all(np.abs(self.y) == 1.0):
                raise ValueError("boolean labels must be -1 or +1")
        elif self.y.size and (self.y.min() < 0.0 or self.y.max() > 1.0):
            raise ValueError("real labels must lie in [0, 1]")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.m

    def _like(self, X, y, **meta) -> LabeledDataset:
        return LabeledDataset(X, y, self.label_kind, self.marginal, self.seed, {**self.meta, **meta})

    def take(self, idx) -> LabeledDataset:
        return self._like(self.X[idx], self.y[idx])

    def split(self, n_first: int) -> tuple[LabeledDataset, LabeledDataset]:
        """First ``n_first`` samples and the rest, in order."""
        if not 0 <= n_first <= self.m:
            raise ValueError(f"cannot split {self.m} samples at {n_first}")
        return self.take(slice(0, n_first)), self.take(slice(n_first, None))

    def random_split(self, fraction: float, rng: np.random.Generator) -> tuple[LabeledDataset, LabeledDataset]:
        """(first, second) with ``second`` holding round(fraction * m) samples."""
        n_second = int(round(fraction * self.m))
        perm = rng.permutation(self.m)
        return self.take(np.sort(perm[n_second:])), self.take(np.sort(perm[:n_second]))

    def header(self) -> dict:
        return {
            "d": self.d,
            "m": self.m,
            "label_kind": self.label_kind,
            "marginal": self.marginal,
            "seed": self.seed,
            "meta": self.meta,
        }


def save_csv(ds: LabeledDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(ds.header(), sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(ds.d)] + ["y"])
        for row, label in zip(ds.X, ds.y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(label))])


def load_csv(path, label_kind: str | None = None, marginal: str | None = None) -> LabeledDataset:
    """Read a dataset CSV. Files without the metadata line need ``label_kind``."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        first = fh.readline()
        header = {}
        if first.startswith("#"):
            header = json.loads(first[1:])
            columns = fh.readline()
        else:
            columns = first
        names = next(csv.reader([columns]))
        if not names or names[-1] != "y":
            raise ValueError(f"{path}: last column must be 'y'")
        rows = np.loadtxt(fh, delimiter=",", ndmin=2) if names else np.empty((0, 1))
    if rows.size == 0:
        rows = np.empty((0, len(names)))
    kind = label_kind or header.get("label_kind")
    if kind is None:
        raise ValueError(f"{path}: no metadata line, pass label_kind")
    return LabeledDataset(
        rows[:, :-1],
        rows[:, -1],
        kind,
        marginal or header.get("marginal", "gaussian"),
        header.get("seed"),
        header.get("meta", {}),
    )


def save_binary(ds: LabeledDataset, path) -> None:
    header = json.dumps(ds.header(), sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<BI", _VERSION, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(ds.X, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ds.y, dtype="<f8").tobytes())


def load_binary(path) -> LabeledDataset:
    with Path(path).open("rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a dataset file")
        version, n_header = struct.unpack("<BI", fh.read(5))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        header = json.loads(fh.read(n_header).decode("utf-8"))
        d, m = header["d"], header["m"]
        X = np.frombuffer(fh.read(8 * m * d), dtype="<f8").reshape(m, d)
        y = np.frombuffer(fh.read(8 * m), dtype="<f8")
    if y.shape != (m,):
        raise ValueError(f"{path}: truncated payload")
    return LabeledDataset(X.copy(), y.copy(), header["label_kind"], header["marginal"],
                          header.get("seed"), header.get("meta", {}))


def load_dataset(path) -> LabeledDataset:
    """Dispatch on the file signature: binary if it starts with the magic, else CSV."""
    with Path(path).open("rb") as fh:
        magic = fh.read(4)
    return load_binary(path) if magic == _MAGIC else load_csv(path)
