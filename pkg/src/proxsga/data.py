"""Dataset readers: LIBSVM sparse text and MNIST IDX binaries.

Both readers produce a :class:`SparseDataset`, a row-sparse feature matrix
with labels in {-1, +1}. Feature indices are 1-based on disk and 0-based in
memory.
"""

from __future__ import annotations

import gzip
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, TextIO

import numpy as np
import scipy.sparse as sp

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DatasetFormatError(ValueError):
    """Raised for malformed dataset input."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def default_label_map(label: float) -> float:
    return 1.0 if label > 0 else -1.0


@dataclass(frozen=True, eq=False)
class SparseDataset:
    """Finite-sum training set ``{(x^j, y^j)}``.

    Attributes
    ----------
    X : scipy.sparse.csr_matrix
        ``n x d`` feature matrix with sorted, duplicate-free column indices.
    labels : ndarray
        Length ``n`` array of +1.0 / -1.0.
    row_sq_norms : ndarray
        Cached squared Euclidean norm of every row.
    """

    X: sp.csr_matrix
    labels: np.ndarray
    row_sq_norms: np.ndarray

    @classmethod
    def from_matrix(cls, X, labels) -> "SparseDataset":
        X = sp.csr_matrix(X, dtype=np.float64)
        X.sum_duplicates()
        X.sort_indices()
        X.eliminate_zeros()
        labels = np.asarray(labels, dtype=np.float64).ravel()
        if labels.shape[0] != X.shape[0]:
            raise ValueError(
                f"label count {labels.shape[0]} != row count {X.shape[0]}")
        if not np.all(np.abs(labels) == 1.0):
            raise ValueError("labels must be +1 or -1")
        sq = np.asarray(X.multiply(X).sum(axis=1)).ravel()
        X.data.setflags(write=False)
        labels.setflags(write=False)
        sq.setflags(write=False)
        return cls(X=X, labels=labels, row_sq_norms=sq)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def row(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """0-based ``(indices, values)`` of row ``j``."""
        lo, hi = self.X.indptr[j], self.X.indptr[j + 1]
        return self.X.indices[lo:hi], self.X.data[lo:hi]

    def rows(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for j in range(self.n):
            yield self.row(j)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseDataset):
            return NotImplemented
        if self.X.shape != other.X.shape:
            return False
        return (np.array_equal(self.X.indptr, other.X.indptr)
                and np.array_equal(self.X.indices, other.X.indices)
                and np.array_equal(self.X.data, other.X.data)
                and np.array_equal(self.labels, other.labels))

    def __repr__(self) -> str:
        return f"SparseDataset(n={self.n}, d={self.d}, nnz={self.X.nnz})"


def parse_libsvm(stream: Iterable[str], d: Optional[int] = None,
                 label_map: Callable[[float], float] = default_label_map,
                 ) -> SparseDataset:
    """Parse LIBSVM text (``label idx:val idx:val ...``).

    ``d`` overrides the feature dimension; otherwise the largest index seen
    is used. Blank lines are skipped.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    labels: list[float] = []
    max_index = 0
    for lineno, line in enumerate(stream, start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            raw_label = float(tokens[0])
        except ValueError:
            raise DatasetFormatError(f"bad label {tokens[0]!r}", lineno) from None
        labels.append(label_map(raw_label))
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise DatasetFormatError(f"bad feature token {tok!r}", lineno)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise DatasetFormatError(
                    f"bad feature token {tok!r}", lineno) from None
            if idx < 1:
                raise DatasetFormatError(f"index {idx} < 1", lineno)
            if idx <= prev:
                raise DatasetFormatError(
                    f"indices not strictly increasing at {idx}", lineno)
            if d is not None and idx > d:
                raise DatasetFormatError(
                    f"index {idx} exceeds dimension {d}", lineno)
            prev = idx
            if val != 0.0:
                indices.append(idx - 1)
                values.append(val)
        max_index = max(max_index, prev)
        indptr.append(len(indices))
    if not labels:
        raise DatasetFormatError("empty input")
    dim = d if d is not None else max_index
    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64),
         np.asarray(indices, dtype=np.int32),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), dim))
    return SparseDataset.from_matrix(X, labels)


def write_libsvm(ds: SparseDataset, stream: TextIO) -> None:
    for j, (idx, val) in enumerate(ds.rows()):
        label = "+1" if ds.labels[j] > 0 else "-1"
        feats = " ".join(f"{i + 1}:{v!r}" for i, v in zip(idx.tolist(), val.tolist()))
        stream.write(f"{label} {feats}\n" if feats else f"{label}\n")


def _read_exact(stream, nbytes: int, what: str) -> bytes:
    buf = stream.read(nbytes)
    if len(buf) != nbytes:
        raise DatasetFormatError(
            f"truncated {what}: expected {nbytes} bytes, got {len(buf)}")
    return buf


def parse_mnist_idx(image_stream, label_stream, positive_class: int = 1
                    ) -> SparseDataset:
    """Read IDX3 images + IDX1 labels as a one-vs-rest problem.

    Pixels are scaled to [0, 1]. Digit ``positive_class`` maps to +1, all
    other digits to -1.
    """
    magic, count, nrows, ncols = struct.unpack(
        ">IIII", _read_exact(image_stream, 16, "image header"))
    if magic != IDX_IMAGES_MAGIC:
        raise DatasetFormatError(f"bad image magic 0x{magic:08x}")
    lmagic, lcount = struct.unpack(
        ">II", _read_exact(label_stream, 8, "label header"))
    if lmagic != IDX_LABELS_MAGIC:
        raise DatasetFormatError(f"bad label magic 0x{lmagic:08x}")
    if lcount != count:
        raise DatasetFormatError(
            f"image count {count} != label count {lcount}")
    d = nrows * ncols
    pixels = np.frombuffer(
        _read_exact(image_stream, count * d, "image data"), dtype=np.uint8)
    digits = np.frombuffer(
        _read_exact(label_stream, count, "label data"), dtype=np.uint8)
    X = sp.csr_matrix(pixels.reshape(count, d)).astype(np.float64)
    X.data /= 255.0
    labels = np.where(digits == positive_class, 1.0, -1.0)
    return SparseDataset.from_matrix(X, labels)


def _open_binary(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_dataset(path, fmt: str = "libsvm", d: Optional[int] = None,
                 positive_class: int = 1,
                 label_path=None) -> SparseDataset:
    """Load a dataset from disk.

    For ``fmt="idx"`` the image file is ``path``; the label file defaults to
    the sibling obtained by replacing ``images-idx3`` with ``labels-idx1``.
    """
    path = Path(path)
    if fmt == "libsvm":
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "rt") as fh:
            return parse_libsvm(fh, d=d)
    if fmt == "idx":
        if label_path is None:
            name = path.name.replace("images-idx3", "labels-idx1")
            if name == path.name:
                raise ValueError(
                    f"cannot infer label file for {path}; pass label_path")
            label_path = path.with_name(name)
        with _open_binary(path) as img, _open_binary(Path(label_path)) as lab:
            return parse_mnist_idx(img, lab, positive_class=positive_class)
    raise ValueError(f"unknown dataset format {fmt!r}")


def max_row_sq_norm(ds: SparseDataset) -> float:
    if ds.n == 0:
        raise ValueError("empty dataset")
    return float(np.max(ds.row_sq_norms))


def mean_row_sq_norm(ds: SparseDataset) -> float:
    if ds.n == 0:
        raise ValueError("empty dataset")
    return float(np.mean(ds.row_sq_norms))
