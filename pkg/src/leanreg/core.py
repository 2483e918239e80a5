"""Data model: datasets, design matrices, and rank diagnostics.

A :class:`Dataset` holds observed ``(y_i, x_i)`` tuples with explicit
regressor/response designation; :func:`build_design` prepends the
all-ones intercept column; :func:`check_rank` reports the rank of the
sample second-moment matrix.  All types are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ColumnError,
    DataError,
    EmptyInputError,
    ParseError,
)

__all__ = [
    "Dataset",
    "DesignMatrix",
    "RankReport",
    "INTERCEPT_LABEL",
    "RANK_RTOL",
    "load_csv",
    "write_csv",
    "build_design",
    "check_rank",
]

INTERCEPT_LABEL = "(Intercept)"

# Relative rank tolerance: an eigenvalue at or below RANK_RTOL times the
# largest eigenvalue counts as zero.  Relative, so the test is scale-free.
RANK_RTOL = 1e-10


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Observed response/regressor tuples.

    Attributes
    ----------
    response : (n,) float array
    regressors : (n, p) float array; p may be 0
    names : tuple of p regressor labels, unique and nonempty
    response_name : label of the response column
    """

    response: np.ndarray
    regressors: np.ndarray
    names: tuple[str, ...]
    response_name: str = "y"

    def __post_init__(self):
        object.__setattr__(self, "response", _as_readonly(np.atleast_1d(self.response)))
        reg = np.array(self.regressors, dtype=float, copy=True)
        if reg.ndim == 1:
            reg = reg.reshape(-1, 1) if reg.size else reg.reshape(0, 0)
        object.__setattr__(self, "regressors", _as_readonly(reg))
        object.__setattr__(self, "names", tuple(str(s) for s in self.names))
        n = self.response.shape[0]
        if n < 1:
            raise EmptyInputError("dataset must contain at least one observation")
        if self.regressors.shape[0] != n:
            raise DataError(
                f"regressor rows ({self.regressors.shape[0]}) do not match "
                f"response length ({n})"
            )
        if self.regressors.shape[1] != len(self.names):
            raise DataError(
                f"{len(self.names)} regressor names for "
                f"{self.regressors.shape[1]} regressor columns"
            )
        if len(set(self.names)) != len(self.names):
            raise DataError("regressor names must be unique")
        if any(not s for s in self.names) or not self.response_name:
            raise DataError("column names must be nonempty")
        if not np.all(np.isfinite(self.response)) or not np.all(np.isfinite(self.regressors)):
            raise DataError("dataset values must be finite (no NaN/Inf)")

    @property
    def n(self) -> int:
        return self.response.shape[0]

    @property
    def p(self) -> int:
        return self.regressors.shape[1]

    def to_json_dict(self) -> dict:
        """JSON-ready dict: {response_name, names, response, regressors}."""
        return {
            "response_name": self.response_name,
            "names": list(self.names),
            "response": self.response.tolist(),
            "regressors": self.regressors.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Dataset":
        return cls(
            response=np.asarray(obj["response"], dtype=float),
            regressors=np.asarray(obj["regressors"], dtype=float).reshape(
                len(obj["response"]), len(obj["names"])
            ),
            names=tuple(obj["names"]),
            response_name=obj["response_name"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class DesignMatrix:
    """n x (p+1) design with the all-ones intercept in column 0."""

    matrix: np.ndarray
    column_labels: tuple[str, ...]

    def __post_init__(self):
        m = _as_readonly(np.atleast_2d(self.matrix))
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "column_labels", tuple(self.column_labels))
        if m.shape[1] != len(self.column_labels):
            raise DataError("column label count does not match design width")
        if m.shape[0] < 1:
            raise EmptyInputError("design matrix must have at least one row")
        if not np.all(m[:, 0] == 1.0):
            raise DataError("design column 0 must be identically 1")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def ncol(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class RankReport:
    """Rank diagnostics of the second-moment matrix (1/n) sum x_i x_i'."""

    rank: int
    min_eigenvalue: float
    full_rank: bool
    max_eigenvalue: float = field(default=float("nan"))


def load_csv(path, response: str, regressors: list[str]) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    The file must have a header row; cells in the named columns must be
    numeric ('.' decimal point, optional quoting).  Rows are kept in
    file order.

    Raises
    ------
    ColumnError
        A named column is absent from the header.
    ParseError
        A cell is non-numeric; the error cites the 1-based data row and
        the column name.
    EmptyInputError
        The file has no header or no data rows.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        return _read_csv(fh, response, regressors)


def _read_csv(fh, response, regressors) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("empty file: no header row") from None
    header = [h.strip() for h in header]
    wanted = [response] + list(regressors)
    for name in wanted:
        if name not in header:
            raise ColumnError(f"column {name!r} not found in header {header}")
    idx = {name: header.index(name) for name in wanted}

    y_values: list[float] = []
    x_rows: list[list[float]] = []
    for rownum, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        parsed = {}
        for name in wanted:
            cell = row[idx[name]].strip() if idx[name] < len(row) else ""
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"cannot parse cell {cell!r} at row {rownum}, column {name!r}",
                    row=rownum,
                    column=name,
                ) from None
            if not np.isfinite(value):
                raise ParseError(
                    f"non-finite value {cell!r} at row {rownum}, column {name!r}",
                    row=rownum,
                    column=name,
                )
            parsed[name] = value
        y_values.append(parsed[response])
        x_rows.append([parsed[name] for name in regressors])

    if not y_values:
        raise EmptyInputError("no data rows after the header")
    reg = np.asarray(x_rows, dtype=float).reshape(len(y_values), len(regressors))
    return Dataset(
        response=np.asarray(y_values, dtype=float),
        regressors=reg,
        names=tuple(regressors),
        response_name=response,
    )


def _format_value(v: float) -> str:
    # repr() of a float is the shortest string that round-trips, so
    # write -> read reproduces the doubles bit-identically.
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_csv(ds: Dataset, path_or_buffer) -> None:
    """Write a :class:`Dataset` back to CSV (round-trips bit-identically)."""
    own = isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__")
    fh = open(path_or_buffer, "w", newline="", encoding="utf-8") if own else path_or_buffer
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([ds.response_name, *ds.names])
        for i in range(ds.n):
            writer.writerow(
                [_format_value(ds.response[i])]
                + [_format_value(v) for v in ds.regressors[i]]
            )
    finally:
        if own:
            fh.close()


def dataset_to_csv_text(ds: Dataset) -> str:
    buf = io.StringIO()
    write_csv(ds, buf)
    return buf.getvalue()


def build_design(ds: Dataset) -> DesignMatrix:
    """Prepend the all-ones intercept column to the regressor matrix."""
    m = np.empty((ds.n, ds.p + 1), dtype=float)
    m[:, 0] = 1.0
    if ds.p:
        m[:, 1:] = ds.regressors
    return DesignMatrix(matrix=m, column_labels=(INTERCEPT_LABEL, *ds.names))


def check_rank(dm: DesignMatrix) -> RankReport:
    """Rank of (1/n) sum x_i x_i' with the relative tolerance RANK_RTOL.

    Degenerate designs are reported, never raised.
    """
    x = dm.matrix
    second_moment = (x.T @ x) / x.shape[0]
    eigs = np.linalg.eigvalsh(second_moment)
    max_eig = float(eigs[-1])
    min_eig = float(eigs[0])
    tol = RANK_RTOL * max_eig
    rank = int(np.sum(eigs > tol))
    return RankReport(
        rank=rank,
        min_eigenvalue=min_eig,
        full_rank=rank == dm.ncol,
        max_eigenvalue=max_eig,
    )
