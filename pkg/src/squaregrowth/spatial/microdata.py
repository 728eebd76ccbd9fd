"""Point microdata: one row per unit with a location and a factor label."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from ..combinatorics import FactorSet

REQUIRED = ("unit_id", "lat", "lon", "factor")


class IngestError(ValueError):
    """Malformed input; ``line`` is the 1-based line number in the source."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class RejectReport:
    rows: tuple[tuple[int, str], ...] = ()

    @property
    def count(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class UnitTable:
    """Column store of units. ``factor`` holds indices into ``factors``."""

    unit_id: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    factor: np.ndarray
    factors: FactorSet
    year: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.unit_id)
        year = np.zeros(n, dtype=np.int64) if self.year is None else self.year
        object.__setattr__(self, "year", np.asarray(year, dtype=np.int64))
        for name in ("lat", "lon", "factor", "year"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has the wrong length")
        for arr in (self.unit_id, self.lat, self.lon, self.factor, self.year):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.unit_id)

    @classmethod
    def empty(cls, factors: FactorSet | None = None) -> "UnitTable":
        return cls(
            np.empty(0, dtype=np.int64),
            np.empty(0),
            np.empty(0),
            np.empty(0, dtype=np.int64),
            factors or FactorSet(()),
        )

    @classmethod
    def from_columns(cls, unit_id, lat, lon, labels: Iterable[str], year=None, factors=None) -> "UnitTable":
        labels = list(labels)
        if factors is None:
            factors = FactorSet(tuple(dict.fromkeys(labels)))
        lookup = {label: i for i, label in enumerate(factors.labels)}
        codes = np.array([lookup[label] for label in labels], dtype=np.int64)
        return cls(
            np.asarray(unit_id, dtype=np.int64),
            np.asarray(lat, dtype=np.float64),
            np.asarray(lon, dtype=np.float64),
            codes,
            factors,
            None if year is None else np.asarray(year, dtype=np.int64),
        )

    def select(self, mask: np.ndarray) -> "UnitTable":
        return UnitTable(
            self.unit_id[mask], self.lat[mask], self.lon[mask], self.factor[mask], self.factors, self.year[mask]
        )

    def factor_counts(self) -> np.ndarray:
        return np.bincount(self.factor, minlength=self.factors.m)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["unit_id", "lat", "lon", "factor", "year"])
        labels = self.factors.labels
        for uid, la, lo, f, y in zip(self.unit_id, self.lat, self.lon, self.factor, self.year):
            w.writerow([int(uid), repr(float(la)), repr(float(lo)), labels[f], int(y)])
        return buf.getvalue()


def ingest_microdata(source: TextIO | str) -> tuple[UnitTable, RejectReport]:
    """Parse ``unit_id,lat,lon,factor[,year]`` CSV.

    Rows with unparseable fields raise IngestError with the line number.
    Rows with coordinates out of range are dropped and listed in the report.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        return UnitTable.empty(), RejectReport()
    header = [h.strip() for h in header]
    if tuple(header[:4]) != REQUIRED or len(header) > 5 or (len(header) == 5 and header[4] != "year"):
        raise IngestError(1, f"expected header unit_id,lat,lon,factor[,year], got {','.join(header)}")
    has_year = len(header) == 5

    ids, lats, lons, labels, years = [], [], [], [], []
    rejected = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise IngestError(line, f"expected {len(header)} fields, got {len(row)}")
        try:
            uid = int(row[0])
            lat = float(row[1])
            lon = float(row[2])
            year = int(row[4]) if has_year else 0
        except ValueError as exc:
            raise IngestError(line, str(exc)) from None
        label = row[3].strip()
        if not label:
            raise IngestError(line, "empty factor label")
        if not -90.0 <= lat <= 90.0:
            rejected.append((line, f"lat {lat} out of range"))
            continue
        if not -180.0 <= lon <= 180.0:
            rejected.append((line, f"lon {lon} out of range"))
            continue
        ids.append(uid)
        lats.append(lat)
        lons.append(lon)
        labels.append(label)
        years.append(year)

    table = UnitTable.from_columns(ids, lats, lons, labels, years)
    return table, RejectReport(tuple(rejected))
