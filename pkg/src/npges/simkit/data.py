"""Observation matrices with column names and CSV round-tripping."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Dataset", "DataError", "read_csv", "write_csv"]


class DataError(ValueError):
    """Malformed or inconsistent data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n x d`` matrix of real observations.

    ``domain`` is ``"unit"`` for data on the unit cube and ``"real"``
    otherwise.
    """

    values: np.ndarray
    names: tuple[str, ...] = ()
    domain: str = "real"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise DataError(f"expected a 2-d array, got shape {values.shape}")
        if values.shape[0] < 1:
            raise DataError("dataset needs at least one row")
        if not np.all(np.isfinite(values)):
            raise DataError("dataset contains missing or non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        names = tuple(self.names) or tuple(f"X{j + 1}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DataError(f"{len(names)} names for {values.shape[1]} columns")
        object.__setattr__(self, "names", names)
        if self.domain not in ("unit", "real"):
            raise DataError(f"unknown domain {self.domain!r}")
        if self.domain == "unit" and (values.min() < 0 or values.max() > 1):
            raise DataError("unit-cube dataset has values outside [0, 1]")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column_stats(self) -> tuple[np.ndarray, np.ndarray]:
        """Column means and (population) standard deviations, cached."""
        if "stats" not in self._cache:
            self._cache["stats"] = (self.values.mean(axis=0), self.values.std(axis=0))
        return self._cache["stats"]

    def standardized(self) -> np.ndarray:
        """Columns centred and scaled to unit variance; zero-variance columns stay zero."""
        if "std" not in self._cache:
            mean, sd = self.column_stats()
            z = (self.values - mean) / np.where(sd > 0, sd, 1.0)
            z.setflags(write=False)
            self._cache["std"] = z
        return self._cache["std"]


def write_csv(data: Dataset, path: str | Path | None = None) -> str:
    """Header row plus full-precision values; returns the text."""
    buf = io.StringIO()
    buf.write(",".join(data.names) + "\n")
    for row in data.values:
        buf.write(",".join("%.17g" % v for v in row) + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path: str | Path, domain: str = "real") -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    names, body = rows[0], rows[1:]
    try:
        values = np.array([[float(v) for v in r] for r in body if r], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if values.ndim != 2 or values.shape[1] != len(names):
        raise DataError(f"{path}: ragged rows or header mismatch")
    return Dataset(values, tuple(n.strip() for n in names), domain)
