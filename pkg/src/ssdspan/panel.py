"""Return-panel ingestion, validation and windowing.

A panel is a dated T x p matrix of simple (arithmetic) monthly returns with
an observation mask. Dates are kept as ISO-8601 strings and mapped to ordinal
month indices internally; no log transform is ever applied.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSupportError,
    EmptyUniverseError,
    PanelParseError,
    PanelValidationError,
    WindowRangeError,
)

_DATE_RE = re.compile(r"^(\d{4})-(\d{2})(?:-(\d{2}))?$")


def month_index(date: str) -> int:
    """Ordinal month of an ISO-8601 date string (YYYY-MM or YYYY-MM-DD)."""
    m = _DATE_RE.match(date.strip())
    if m is None:
        raise PanelParseError(f"malformed date {date!r} (expected YYYY-MM or YYYY-MM-DD)")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise PanelParseError(f"malformed date {date!r} (month out of range)")
    return year * 12 + (month - 1)


@dataclass(frozen=True)
class SupportBounds:
    """Closed interval [lower, upper] covering every observed return."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise PanelValidationError("support bounds must be finite")
        if self.lower > self.upper:
            raise PanelValidationError("support lower bound exceeds upper bound")


@dataclass(frozen=True)
class ReturnPanel:
    """Immutable dated return matrix.

    Attributes
    ----------
    dates : tuple of str
        ISO-8601 dates, strictly increasing at monthly granularity.
    assets : tuple of str
        Unique asset identifiers, one per column.
    values : ndarray, shape (T, p)
        Simple returns as decimals; NaN where unobserved.
    mask : ndarray of bool, shape (T, p)
        True where the cell is observed.
    """

    dates: tuple[str, ...]
    assets: tuple[str, ...]
    values: np.ndarray
    mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = self.mask
        if mask is None:
            mask = ~np.isnan(values)
        mask = np.asarray(mask, dtype=bool)
        if values.ndim != 2:
            raise PanelValidationError("values must be a T x p matrix")
        T, p = values.shape
        if len(self.dates) != T:
            raise PanelValidationError(f"{len(self.dates)} dates for {T} rows")
        if len(self.assets) != p:
            raise PanelValidationError(f"{len(self.assets)} asset names for {p} columns")
        if mask.shape != values.shape:
            raise PanelValidationError("mask shape differs from values shape")
        if len(set(self.assets)) != p:
            dupes = sorted({a for a in self.assets if self.assets.count(a) > 1})
            raise PanelValidationError(f"duplicate asset identifiers: {dupes}")
        months = [month_index(d) for d in self.dates]
        if any(b <= a for a, b in zip(months, months[1:])):
            raise PanelValidationError("dates must be strictly increasing")
        # unobserved cells are stored as NaN regardless of input content
        values = np.where(mask, values, np.nan)
        col_ok = mask.all(axis=0)
        if col_ok.any() and not np.isfinite(values[:, col_ok]).all():
            raise PanelValidationError("fully-observed column contains non-finite value")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]

    @property
    def fully_observed(self) -> bool:
        return bool(self.mask.all())


def load_panel(path: str, delimiter: str = ",") -> ReturnPanel:
    """Parse a return (or factor) CSV into a panel.

    Layout: header ``date,ASSET1,ASSET2,...``; ISO-8601 dates; decimal
    returns; an empty cell marks a missing observation.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelParseError(f"{path}: empty file") from None
        if len(header) < 2:
            raise PanelParseError(f"{path}: header must name a date column and at least one asset")
        assets = [h.strip() for h in header[1:]]
        dates: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if len(row) != len(header):
                raise PanelParseError(f"{path}, row {lineno}: expected {len(header)} cells, got {len(row)}")
            date = row[0].strip()
            try:
                month_index(date)
            except PanelParseError as exc:
                raise PanelParseError(f"{path}, row {lineno}: {exc}") from None
            parsed: list[float] = []
            for j, cell in enumerate(row[1:], start=1):
                text = cell.strip()
                if text == "":
                    parsed.append(np.nan)
                    continue
                try:
                    value = float(text)
                except ValueError:
                    value = np.nan
                    ok = False
                else:
                    ok = np.isfinite(value)
                if not ok:
                    raise PanelParseError(
                        f"{path}, row {lineno}, column {header[j]!r}: non-numeric cell {cell!r}"
                    )
                parsed.append(value)
            dates.append(date)
            rows.append(parsed)
    if not rows:
        raise PanelParseError(f"{path}: no data rows")
    values = np.array(rows, dtype=float)
    try:
        return ReturnPanel(dates=tuple(dates), assets=tuple(assets), values=values)
    except PanelValidationError as exc:
        raise PanelValidationError(f"{path}: {exc}") from None


def window_and_filter(panel: ReturnPanel, start: str, length: int) -> ReturnPanel:
    """Take `length` consecutive rows from `start` and drop incomplete assets.

    An asset is excluded when it has any missing cell inside the window, so
    the returned panel is fully observed. Idempotent on its own output.
    """
    if length < 1:
        raise WindowRangeError(f"window length must be positive, got {length}")
    start_month = month_index(start)
    months = [month_index(d) for d in panel.dates]
    i0 = next((i for i, m in enumerate(months) if m >= start_month), None)
    if i0 is None or i0 + length > panel.n_periods:
        raise WindowRangeError(
            f"window of {length} rows starting {start} does not fit in panel "
            f"({panel.dates[0]}..{panel.dates[-1]}, T={panel.n_periods})"
        )
    sl = slice(i0, i0 + length)
    keep = panel.mask[sl].all(axis=0)
    if not keep.any():
        raise EmptyUniverseError(f"no asset is fully observed in the window starting {start}")
    return ReturnPanel(
        dates=panel.dates[sl],
        assets=tuple(a for a, k in zip(panel.assets, keep) if k),
        values=panel.values[sl][:, keep],
        mask=panel.mask[sl][:, keep],
    )


def support_bounds(panel: ReturnPanel) -> SupportBounds:
    """Min and max observed return over a fully observed panel."""
    if not panel.fully_observed:
        raise PanelValidationError("support bounds require a fully observed panel")
    if panel.values.size == 0:
        raise PanelValidationError("cannot take support bounds of an empty panel")
    return SupportBounds(lower=float(panel.values.min()), upper=float(panel.values.max()))


def panel_from_array(values: np.ndarray, assets: list[str] | None = None,
                     start: str = "2000-01") -> ReturnPanel:
    """Wrap a plain T x p return matrix with synthetic monthly dates."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise PanelValidationError("values must be a T x p matrix")
    T, p = values.shape
    if assets is None:
        assets = [f"A{i + 1}" for i in range(p)]
    base = month_index(start)
    dates = tuple(f"{(base + t) // 12:04d}-{(base + t) % 12 + 1:02d}" for t in range(T))
    return ReturnPanel(dates=dates, assets=tuple(assets), values=values)


def array_bounds(values: np.ndarray) -> SupportBounds:
    """Support bounds of a raw fully-observed return matrix."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise PanelValidationError("cannot take support bounds of an empty matrix")
    if not np.isfinite(values).all():
        raise PanelValidationError("support bounds require finite values")
    return SupportBounds(lower=float(values.min()), upper=float(values.max()))


def degenerate_guard(bounds: SupportBounds) -> None:
    """Reject a point support before grid construction."""
    if bounds.lower == bounds.upper:
        raise DegenerateSupportError(
            f"constant returns (support collapses to {bounds.lower}); cannot build an outcome grid"
        )
