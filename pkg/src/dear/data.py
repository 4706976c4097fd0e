"""Dataset ingestion, filtering, rolling windows, and run configuration.

CSV ingestion is schema-driven: the config names the timestamp, target and
covariate columns, flags circular ones (degrees in raw files), and the
special covariate name ``time_of_day`` is derived from the timestamps as a
circular angle 2*pi*seconds_since_midnight/86400.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np

from .errors import (EmptyDatasetError, InsufficientDataError,
                     InvalidConfigError, SchemaError)
from .kernels import VariableKind

__all__ = [
    "Dataset",
    "CsvSchema",
    "IngestReport",
    "FilterRules",
    "RunConfig",
    "ingest_csv",
    "serialize_dataset",
    "filter_idle",
    "rolling_windows",
    "clamp",
]

_TWO_PI = 2.0 * math.pi
TIME_OF_DAY = "time_of_day"


@dataclass(frozen=True)
class Dataset:
    """Aligned covariate matrix and target series with a time index."""

    timestamps: np.ndarray
    y: np.ndarray
    x: np.ndarray
    kinds: tuple
    covariate_names: tuple
    name: str = ""

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        y = np.asarray(self.y, dtype=float).ravel()
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[0] != y.size:
            x = x.T
        if not (ts.size == y.size == x.shape[0]):
            raise SchemaError("timestamps, target and covariates differ in length")
        if ts.size == 0:
            raise EmptyDatasetError("dataset has no rows")
        if np.any(np.diff(ts) <= 0):
            raise SchemaError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise SchemaError("dataset contains non-finite values")
        kinds = tuple(VariableKind(k) for k in self.kinds)
        if len(kinds) != x.shape[1] or len(self.covariate_names) != x.shape[1]:
            raise SchemaError("kinds/names must match the covariate count")
        for j, k in enumerate(kinds):
            if k is VariableKind.CIRCULAR:
                col = np.mod(x[:, j], _TWO_PI)
                x = x.copy() if x is self.x else x
                x[:, j] = col
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", np.ascontiguousarray(x))
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def rows(self, lo: int, hi: int) -> "Dataset":
        return replace(self, timestamps=self.timestamps[lo:hi],
                       y=self.y[lo:hi], x=self.x[lo:hi])


@dataclass(frozen=True)
class CsvSchema:
    timestamp: str
    target: str
    covariates: tuple
    circular: frozenset = frozenset()
    circular_unit: str = "degrees"  # raw files carry degrees; radians for round trips
    name: str = ""

    def __post_init__(self):
        if self.circular_unit not in ("degrees", "radians"):
            raise InvalidConfigError("circular_unit must be degrees or radians")
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "circular", frozenset(self.circular))
        unknown = self.circular - set(self.covariates)
        if unknown:
            raise InvalidConfigError(f"circular columns {sorted(unknown)} not in covariates")


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_dropped: int = 0

    def as_text(self) -> str:
        return f"rows_read={self.rows_read} rows_dropped={self.rows_dropped}"


def _parse_timestamp(cell: str) -> int:
    cell = cell.strip()
    try:
        return int(float(cell))
    except ValueError:
        pass
    dt = datetime.fromisoformat(cell)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def ingest_csv(path, schema: CsvSchema):
    """Parse a headered CSV into a Dataset; malformed rows are dropped.

    Returns (Dataset, IngestReport). Circular columns are converted to
    radians (from degrees unless the schema says radians) and reduced into
    [0, 2*pi). Duplicate timestamps keep the first occurrence.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        pos = {h: i for i, h in enumerate(header)}
        needed = [schema.timestamp, schema.target] + [
            c for c in schema.covariates if c != TIME_OF_DAY]
        missing = [c for c in needed if c not in pos]
        if missing:
            raise SchemaError(f"{path}: missing mandatory columns {missing}")
        report = IngestReport()
        ts_list, y_list, x_rows = [], [], []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            report.rows_read += 1
            try:
                ts = _parse_timestamp(row[pos[schema.timestamp]])
                y = float(row[pos[schema.target]])
                if not math.isfinite(y):
                    raise ValueError
                xr = []
                for c in schema.covariates:
                    if c == TIME_OF_DAY:
                        xr.append(_TWO_PI * (ts % 86400) / 86400.0)
                        continue
                    v = float(row[pos[c]])
                    if not math.isfinite(v):
                        raise ValueError
                    if c in schema.circular:
                        if schema.circular_unit == "degrees":
                            v = math.radians(v)
                        v = v % _TWO_PI
                    xr.append(v)
            except (ValueError, IndexError):
                report.rows_dropped += 1
                continue
            ts_list.append(ts)
            y_list.append(y)
            x_rows.append(xr)
    if not ts_list:
        raise EmptyDatasetError(f"{path}: no rows survived ingestion")
    ts = np.asarray(ts_list, dtype=np.int64)
    order = np.argsort(ts, kind="stable")
    ts, y, x = ts[order], np.asarray(y_list)[order], np.asarray(x_rows)[order]
    keep = np.concatenate([[True], np.diff(ts) > 0])
    report.rows_dropped += int((~keep).sum())
    kinds = tuple(
        VariableKind.CIRCULAR if (c in schema.circular or c == TIME_OF_DAY)
        else VariableKind.LINEAR
        for c in schema.covariates)
    ds = Dataset(ts[keep], y[keep], x[keep], kinds, schema.covariates,
                 name=schema.name or str(path))
    return ds, report


def serialize_dataset(ds: Dataset, path) -> CsvSchema:
    """Write a Dataset back to CSV (circular columns in radians) and return
    the schema that re-ingests it identically."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "target", *ds.covariate_names])
        for i in range(ds.n):
            writer.writerow([int(ds.timestamps[i]), repr(float(ds.y[i])),
                             *[repr(float(v)) for v in ds.x[i]]])
    circular = frozenset(c for c, k in zip(ds.covariate_names, ds.kinds)
                         if k is VariableKind.CIRCULAR and c != TIME_OF_DAY)
    return CsvSchema("timestamp", "target", ds.covariate_names, circular,
                     circular_unit="radians", name=ds.name)


@dataclass(frozen=True)
class FilterRules:
    """Per-column [lo, hi] bounds plus a zero-run rule on the target."""

    bounds: tuple = ()  # (column, lo, hi); column "target" addresses y
    zero_run: int | None = None  # drop runs of >= this many zero-target rows
    zero_tol: float = 0.0


def filter_idle(ds: Dataset, rules: FilterRules):
    """Drop rows violating any rule; returns (Dataset, per-rule removal counts)."""
    keep = np.ones(ds.n, dtype=bool)
    report = {}
    for col, lo, hi in rules.bounds:
        if col == "target":
            vals = ds.y
        else:
            try:
                vals = ds.x[:, ds.covariate_names.index(col)]
            except ValueError:
                raise InvalidConfigError(f"unknown filter column {col!r}") from None
        bad = (vals < lo) | (vals > hi)
        report[f"bounds:{col}"] = int((bad & keep).sum())
        keep &= ~bad
    if rules.zero_run is not None and rules.zero_run > 0:
        zero = np.abs(ds.y) <= rules.zero_tol
        drop = np.zeros(ds.n, dtype=bool)
        i = 0
        while i < ds.n:
            if zero[i]:
                j = i
                while j < ds.n and zero[j]:
                    j += 1
                if j - i >= rules.zero_run:
                    drop[i:j] = True
                i = j
            else:
                i += 1
        report["zero_run"] = int((drop & keep).sum())
        keep &= ~drop
    if not keep.any():
        raise EmptyDatasetError("filtering removed every row")
    idx = np.flatnonzero(keep)
    out = replace(ds, timestamps=ds.timestamps[idx], y=ds.y[idx], x=ds.x[idx])
    return out, report


def rolling_windows(ds: Dataset, window: int, start: int, end: int):
    """Yield (training window, test index) for each test instant in [start, end]."""
    if start < window:
        raise InsufficientDataError(
            f"start index {start} precedes a full window of {window}")
    if end < start:
        raise ValueError("end must be >= start")
    if end >= ds.n:
        raise InsufficientDataError(f"end index {end} beyond dataset of {ds.n} rows")
    for t in range(start, end + 1):
        yield ds.rows(t - window, t), t


def clamp(y: float, lower: float, upper: float) -> float:
    if not lower < upper:
        raise InvalidConfigError("clamp bounds must satisfy lower < upper")
    return min(max(y, lower), upper)


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise InvalidConfigError(f"expected a boolean, got {s!r}")


def _split(s: str) -> tuple:
    return tuple(p.strip() for p in s.split(",") if p.strip())


@dataclass
class RunConfig:
    """Everything one run needs; parsed from a key=value config file."""

    # data schema
    timestamp: str = "timestamp"
    target: str = "target"
    covariates: tuple = ()
    circular: tuple = ()
    circular_unit: str = "degrees"
    # rolling estimation
    window: int = 2000
    cadence: int = 0  # 0 -> window // 10
    min_window: int = 200
    p_max: int = 5
    alpha: float = 0.05
    ar_tol: float = 1e-4
    max_iterations: int = 10
    clamp_lower: float = -1e308
    clamp_upper: float = 1e308
    tau: float | None = None  # sparsity threshold; None -> auto
    anchors: tuple = ()
    groups: tuple = ()  # tuples of covariate names
    refit_bandwidths: bool = True
    # evaluation
    method: str = "dear"
    start: int | None = None
    end: int | None = None
    lam: float = 0.999
    target_range: float | None = None
    grid_instants: tuple = ()
    parallel: bool = False
    seed: int = 0
    # filtering
    filter_bounds: tuple = ()
    zero_run: int | None = None
    # synthetic generation
    synth_mean: str = "sine"
    synth_sd: str = "smooth"
    synth_ar: tuple = (0.6,)
    synth_innovation: str = "normal"
    synth_covariates: str = "iid_uniform"
    synth_dim: int = 1
    synth_n: int = 2000

    def __post_init__(self):
        if self.cadence == 0:
            self.cadence = max(1, self.window // 10)
        if self.window < self.min_window:
            raise InvalidConfigError(
                f"window {self.window} below the minimum {self.min_window}")
        if not self.clamp_lower < self.clamp_upper:
            raise InvalidConfigError("clamp_lower must be below clamp_upper")
        for name in ("alpha", "ar_tol"):
            if not getattr(self, name) > 0:
                raise InvalidConfigError(f"{name} must be positive")
        if not 0.0 < self.lam <= 1.0:
            raise InvalidConfigError("lambda must be in (0, 1]")
        if self.method not in ("dear", "amk", "aml", "persistence", "kdes"):
            raise InvalidConfigError(f"unknown method {self.method!r}")

    def schema(self, name: str = "") -> CsvSchema:
        return CsvSchema(self.timestamp, self.target, self.covariates,
                         frozenset(self.circular), self.circular_unit, name)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InvalidConfigError(f"{path}:{lineno}: expected key=value")
                key, _, val = line.partition("=")
                values[key.strip()] = val.strip()
        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        kw = {}
        bounds = []
        for key, val in values.items():
            try:
                if key.startswith("bound."):
                    lo, hi = _split(val) or ("-inf", "inf")
                    bounds.append((key[len("bound."):], float(lo), float(hi)))
                elif key in ("covariates", "circular", "anchors"):
                    kw[key] = _split(val)
                elif key == "groups":
                    kw[key] = tuple(_split(g) for g in val.split(";") if g.strip())
                elif key in ("window", "cadence", "min_window", "p_max",
                             "max_iterations", "seed", "synth_dim", "synth_n"):
                    kw[key] = int(val)
                elif key in ("start", "end", "zero_run"):
                    kw[key] = int(val)
                elif key in ("alpha", "ar_tol", "clamp_lower", "clamp_upper"):
                    kw[key] = float(val)
                elif key in ("tau", "target_range"):
                    kw[key] = float(val)
                elif key == "lambda":
                    kw["lam"] = float(val)
                elif key in ("parallel", "refit_bandwidths"):
                    kw[key] = _parse_bool(val)
                elif key == "grid_instants":
                    kw[key] = tuple(int(v) for v in _split(val))
                elif key == "synth_ar":
                    kw[key] = tuple(float(v) for v in _split(val)) or ()
                elif key in ("timestamp", "target", "circular_unit", "method",
                             "synth_mean", "synth_sd", "synth_innovation",
                             "synth_covariates"):
                    kw[key] = val
                else:
                    raise InvalidConfigError(f"unknown config key {key!r}")
            except InvalidConfigError:
                raise
            except ValueError as exc:
                raise InvalidConfigError(f"bad value for {key!r}: {val!r}") from exc
        if bounds:
            kw["filter_bounds"] = tuple(bounds)
        return cls(**kw)
