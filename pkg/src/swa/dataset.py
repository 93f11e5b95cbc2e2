"""Design-matrix data model and CSV ingestion.

A :class:`Dataset` couples an ``n x p`` measurement matrix with an
``n``-vector response and per-column feature names.  Instances are
immutable after construction and safe to share across worker processes.
Feature identity is the positional column index; names are presentation
only.  A screened view keeps the original identities in ``source_index``.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = ["Dataset", "load_csv", "standardize", "save_csv"]


@dataclass(frozen=True)
class Dataset:
    """Immutable regression design: x (n x p), response y (n,), feature names (p,).

    ``source_index`` maps local column positions back to the columns of an
    unscreened parent dataset; it is ``None`` for datasets loaded directly.
    """

    x: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    source_index: tuple[int, ...] | None = field(default=None)

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if x.ndim != 2:
            raise DataError(f"x must be a 2-d matrix, got ndim={x.ndim}")
        if y.ndim != 1:
            raise DataError(f"y must be a 1-d vector, got ndim={y.ndim}")
        n, p = x.shape
        if n < 2 or p < 1:
            raise DataError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise DataError(
                f"row-count mismatch: x has {n} rows but y has {y.shape[0]}"
            )
        if not np.isfinite(x).all():
            i, j = np.argwhere(~np.isfinite(x))[0]
            raise DataError(f"non-finite value in x at row {i + 1}, col {j + 1}")
        if not np.isfinite(y).all():
            i = int(np.flatnonzero(~np.isfinite(y))[0])
            raise DataError(f"non-finite value in y at row {i + 1}")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != p:
            raise DataError(f"expected {p} feature names, got {len(names)}")
        if any(not s for s in names):
            raise DataError("feature names must be nonempty")
        if len(set(names)) != p:
            dup = sorted({s for s in names if names.count(s) > 1})
            raise DataError(f"duplicate feature names: {', '.join(dup)}")
        if self.source_index is not None:
            src = tuple(int(i) for i in self.source_index)
            if len(src) != p:
                raise DataError("source_index length must equal p")
            object.__setattr__(self, "source_index", src)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def original_index(self, j: int) -> int:
        """Identity of local column ``j`` in the unscreened parent (or ``j`` itself)."""
        return self.source_index[j] if self.source_index is not None else j

    def select_columns(self, columns) -> "Dataset":
        """View of a subset of columns, preserving original identities."""
        cols = [int(c) for c in columns]
        return Dataset(
            x=self.x[:, cols],
            y=self.y,
            feature_names=tuple(self.feature_names[c] for c in cols),
            source_index=tuple(self.original_index(c) for c in cols),
        )

    def fingerprint(self) -> str:
        """Content hash of the design, response and names (hex digest)."""
        h = hashlib.sha256()
        h.update(f"{self.n}x{self.p}".encode())
        h.update(self.x.tobytes())
        h.update(self.y.tobytes())
        h.update("\x1f".join(self.feature_names).encode())
        if self.source_index is not None:
            h.update(",".join(map(str, self.source_index)).encode())
        return h.hexdigest()[:16]


def _parse_cell(text: str, row: int, col: int, path: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(
            f"{path}: non-numeric cell {text!r} at row {row}, col {col}"
        ) from None
    if math.isnan(v) or math.isinf(v):
        raise DataError(f"{path}: non-finite value {text!r} at row {row}, col {col}")
    return v


def _read_rows(path: str) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            return [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def load_csv(x_path: str, y_path: str, has_header: bool = True) -> Dataset:
    """Load a design matrix and response from two CSV files.

    The x file holds a rectangular numeric body with an optional single
    header row (``has_header``); without a header, columns are named
    ``V1..Vp``.  The y file holds one numeric column; a leading header
    line is skipped automatically if its cell does not parse as a number.
    Malformed input raises :class:`DataError` naming the offending
    row/column (1-based positions within the data body).
    """
    rows = _read_rows(x_path)
    if not rows:
        raise DataError(f"{x_path}: empty file")
    if has_header:
        header = [c.strip() for c in rows[0]]
        body = rows[1:]
        if len(set(header)) != len(header):
            dup = sorted({h for h in header if header.count(h) > 1})
            raise DataError(f"{x_path}: duplicate header names: {', '.join(dup)}")
        names = tuple(header)
    else:
        body = rows
        names = None
    if not body:
        raise DataError(f"{x_path}: no data rows")
    width = len(body[0])
    x = np.empty((len(body), width))
    for i, row in enumerate(body):
        if len(row) != width:
            raise DataError(
                f"{x_path}: ragged row {i + 1}: expected {width} cells, got {len(row)}"
            )
        for j, cell in enumerate(row):
            x[i, j] = _parse_cell(cell.strip(), i + 1, j + 1, x_path)
    if names is None:
        names = tuple(f"V{j + 1}" for j in range(width))
    elif len(names) != width:
        raise DataError(
            f"{x_path}: header has {len(names)} names but rows have {width} cells"
        )

    yrows = _read_rows(y_path)
    if not yrows:
        raise DataError(f"{y_path}: empty file")
    start = 0
    if len(yrows[0]) == 1:
        try:
            float(yrows[0][0])
        except ValueError:
            start = 1  # header line
    y = np.empty(len(yrows) - start)
    for i, row in enumerate(yrows[start:]):
        if len(row) != 1:
            raise DataError(
                f"{y_path}: row {i + 1}: expected a single column, got {len(row)} cells"
            )
        y[i] = _parse_cell(row[0].strip(), i + 1, 1, y_path)

    if y.shape[0] != x.shape[0]:
        raise DataError(
            f"row-count mismatch: {x_path} has {x.shape[0]} rows "
            f"but {y_path} has {y.shape[0]}"
        )
    return Dataset(x=x, y=y, feature_names=names)


def standardize(d: Dataset, center: bool = True, scale: bool = True) -> Dataset:
    """Column-wise centering and/or scaling to unit sample sd (denominator n-1).

    The response is left untouched.  A constant column is an error when
    ``scale`` is requested.
    """
    if not center and not scale:
        return d
    x = np.array(d.x)
    if center:
        x -= x.mean(axis=0)
    if scale:
        sd = d.x.std(axis=0, ddof=1)
        zero = np.flatnonzero(sd == 0)
        if zero.size:
            name = d.feature_names[int(zero[0])]
            raise DataError(f"cannot scale constant column {int(zero[0]) + 1} ({name})")
        x /= sd
    return Dataset(x=x, y=d.y, feature_names=d.feature_names, source_index=d.source_index)


def save_csv(d: Dataset, x_path: str, y_path: str, header: bool = True) -> None:
    """Write the dataset back to CSV at full round-trip precision."""
    with open(x_path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(d.feature_names)
        for row in d.x:
            w.writerow([repr(v) for v in row.tolist()])
    with open(y_path, "w", newline="") as fh:
        w = csv.writer(fh)
        for v in d.y.tolist():
            w.writerow([repr(v)])
