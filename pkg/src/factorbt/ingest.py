"""CSV ingestion and derived return series.

File layout (one directory per dataset)::

    tri.csv btp.csv mv.csv dy.csv ey.csv vol.csv   wide: date,TICKER,...
    ncd.csv                                        date,yield
    overrides.csv (optional)                       ticker,field,date,value

Dates are ISO ``YYYY-MM`` and must be contiguous.  Empty cells are MISSING.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .panel import CharacteristicSet, MonthStamp, Panel, PanelError, align, lag

FIELDS = ("tri", "btp", "mv", "dy", "ey", "vol")
FUNDAMENTAL_FIELDS = ("btp", "mv", "dy", "ey")
#: Months between a fundamental's reference date and its availability.
FUNDAMENTAL_LAG = 3

_CHAR_OF_FIELD = {"btp": "BTP", "mv": "MV", "dy": "DY", "ey": "EY", "vol": "VOL"}


class ParseError(ValueError):
    """Malformed input file; carries the file name and 1-based row number."""

    def __init__(self, path, row: int | None, message: str):
        self.path = str(path)
        self.row = row
        where = f"{self.path}" + (f", row {row}" if row is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class RawDataset:
    """Field panels exactly as read, before lagging."""

    tri: Panel
    btp: Panel
    mv: Panel
    dy: Panel
    ey: Panel
    vol: Panel
    ncd_yield: Panel  # single column "yield", fraction per annum

    def panel(self, name: str) -> Panel:
        return getattr(self, name)

    def replace(self, **panels) -> "RawDataset":
        kw = {f: getattr(self, f) for f in FIELDS + ("ncd_yield",)}
        kw.update(panels)
        return RawDataset(**kw)


@dataclass(frozen=True)
class Override:
    ticker: str
    field: str
    date: MonthStamp
    value: float


@dataclass(frozen=True)
class Dataset:
    """Ingest output: lagged characteristics, log returns and the cash series."""

    raw: RawDataset
    characteristics: CharacteristicSet
    returns: Panel
    ncd_index: Panel  # columns "level", "ret"
    overrides: tuple = field(default=())

    @property
    def mv(self) -> Panel:
        return self.characteristics["MV"]

    @property
    def btp(self) -> Panel:
        return self.characteristics["BTP"]

    @property
    def dates(self):
        return self.returns.dates


# ---------------------------------------------------------------------------
# derived series


def log_returns(tri: Panel) -> Panel:
    """Monthly log returns from a total-return index; zero levels are MISSING."""
    level = tri.array
    level[level <= 0] = np.nan
    out = np.full(tri.shape, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        out[1:] = np.log(level[1:] / level[:-1])
    return tri.with_values(out)


def momentum(returns: Panel, window: int, skip: int) -> Panel:
    """Trailing sum of ``window`` returns, ending ``skip + 1`` months back.

    ``out[t] = sum(returns[t - k] for k in skip+1 .. skip+window)``; any
    MISSING summand makes the cell MISSING.
    """
    if window < 1 or skip < 0:
        raise ValueError("need window >= 1 and skip >= 0")
    r = returns.array
    n = r.shape[0]
    out = np.full(r.shape, np.nan)
    filled = np.where(np.isnan(r), 0.0, r)
    cmiss = np.vstack(
        [np.zeros((1, r.shape[1]), dtype=int), np.cumsum(np.isnan(r), axis=0)]
    )
    for t in range(skip + window, n):
        lo, hi = t - skip - window, t - skip  # rows lo .. hi-1
        bad = (cmiss[hi] - cmiss[lo]) > 0
        # summed per window, not via prefix sums, so a cell never depends on
        # data outside its own window (bit-exact look-ahead checks)
        out[t] = np.where(bad, np.nan, filled[lo:hi].sum(axis=0))
    return returns.with_values(out)


def ncd_index(yields: Panel) -> Panel:
    """Monthly cash index from quoted 3-month NCD yields (NACQ).

    The return over month t is a third of the quarterly log holding yield
    at the rate quoted at t-1: ``ln(1 + y[t-1] / 4) / 3``.  A MISSING quote
    leaves the next return MISSING and the index flat.

    Returns a panel with columns ``level`` (starting at 1.0) and ``ret``.
    """
    y = yields.array[:, 0]
    n = y.shape[0]
    ret = np.full(n, np.nan)
    ret[1:] = np.log1p(y[:-1] / 4.0) / 3.0
    level = np.ones(n)
    for t in range(1, n):
        step = ret[t] if np.isfinite(ret[t]) else 0.0
        level[t] = level[t - 1] * math.exp(step)
    return Panel(yields.start, ("level", "ret"), np.column_stack([level, ret]))


# ---------------------------------------------------------------------------
# CSV parsing


def _parse_float(text: str, path, row: int) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(path, row, f"not a number: {text!r}") from None


def _parse_month(text: str, path, row: int) -> MonthStamp:
    try:
        return MonthStamp.parse(text)
    except ValueError as exc:
        raise ParseError(path, row, str(exc)) from None


def _check_dates(months: Sequence[MonthStamp], path) -> None:
    for k in range(1, len(months)):
        a, b = months[k - 1], months[k]
        if b.index <= a.index:
            raise ParseError(path, k + 2, f"dates not increasing: {a} then {b}")
        if b.index != a.index + 1:
            raise ParseError(path, k + 2, f"gap in monthly dates: {a} -> {b}")


def read_wide_csv(path) -> Panel:
    """Read a ``date,TICKER,...`` file into a panel."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(path, None, f"cannot read file: {exc.strerror}") from None
    if not rows:
        raise ParseError(path, None, "empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0].lower() != "date":
        raise ParseError(path, 1, "first column must be 'date'")
    tickers = header[1:]
    if any(not t for t in tickers):
        raise ParseError(path, 1, "empty ticker in header")
    seen = set()
    for t in tickers:
        if t in seen:
            raise ParseError(path, 1, f"duplicate ticker {t!r}")
        seen.add(t)
    months, values = [], []
    for k, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(path, k, f"expected {len(header)} fields, got {len(row)}")
        months.append(_parse_month(row[0], path, k))
        values.append([_parse_float(c, path, k) for c in row[1:]])
    if not months:
        raise ParseError(path, None, "no data rows")
    _check_dates(months, path)
    return Panel(months[0], tickers, np.array(values, dtype=float).reshape(len(months), len(tickers)))


def read_ncd_csv(path) -> Panel:
    """Read ``date,yield`` into a single-column panel named ``yield``."""
    path = Path(path)
    panel = read_wide_csv(path)
    if panel.stocks != ("yield",):
        raise ParseError(path, 1, "expected header 'date,yield'")
    y = panel.array
    bad = np.isfinite(y) & ((y < 0) | (y >= 1))
    if bad.any():
        i = int(np.argwhere(bad)[0, 0])
        raise ParseError(path, i + 2, f"yield {y[i, 0]} outside [0, 1)")
    return panel


def read_overrides(path) -> list[Override]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or [h.strip() for h in rows[0]] != ["ticker", "field", "date", "value"]:
        raise ParseError(path, 1, "expected header 'ticker,field,date,value'")
    out = []
    for k, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ParseError(path, k, f"expected 4 fields, got {len(row)}")
        ticker, fld = row[0].strip(), row[1].strip().lower()
        if fld not in FIELDS:
            raise ParseError(path, k, f"unknown field {row[1]!r}")
        out.append(
            Override(ticker, fld, _parse_month(row[2], path, k), _parse_float(row[3], path, k))
        )
    return out


def write_wide_csv(panel: Panel, path) -> None:
    path = Path(path)
    arr, valid = panel.array, panel.valid
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.stocks])
        for i, d in enumerate(panel.dates):
            w.writerow(
                [str(d)] + [repr(float(v)) if ok else "" for v, ok in zip(arr[i], valid[i])]
            )


def write_dataset(raw: RawDataset, directory) -> None:
    """Write a raw dataset in the layout :func:`load_dataset` reads."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for f in FIELDS:
        write_wide_csv(raw.panel(f), directory / f"{f}.csv")
    write_wide_csv(raw.ncd_yield, directory / "ncd.csv")


# ---------------------------------------------------------------------------
# assembly


def apply_overrides(raw: RawDataset, overrides: Sequence[Override]) -> RawDataset:
    """Substitute individual raw cells, e.g. primary-listing ratios of dual listings."""
    if not overrides:
        return raw
    grids = {}
    for o in overrides:
        p = raw.panel(o.field)
        if o.ticker not in p.stocks:
            raise PanelError(f"override references unknown stock {o.ticker!r}")
        if not p.start <= o.date <= p.end:
            raise PanelError(f"override date {o.date} outside {p.start}..{p.end}")
        if o.field not in grids:
            grids[o.field] = p.array
        grids[o.field][p.row_of(o.date), p.col_of(o.ticker)] = o.value
    return raw.replace(**{f: raw.panel(f).with_values(g) for f, g in grids.items()})


def build_dataset(raw: RawDataset, overrides: Sequence[Override] = ()) -> Dataset:
    """Overrides, quarter lag on fundamentals, returns, momentum, alignment."""
    raw = apply_overrides(raw, overrides)
    panels = align([raw.panel(f) for f in FIELDS])
    aligned = dict(zip(FIELDS, panels))
    ref = aligned["tri"]
    ncd = raw.ncd_yield
    if ncd.start > ref.start or ncd.end < ref.end:
        first = max(ncd.start, ref.start)
        last = min(ncd.end, ref.end)
        if last < first:
            raise PanelError("no overlapping dates")
        aligned = {f: p.slice_dates(first, last) for f, p in aligned.items()}
        ref = aligned["tri"]
    ncd = ncd.slice_dates(ref.start, ref.end)

    returns = log_returns(aligned["tri"])
    chars = {}
    for f in ("btp", "mv", "dy", "ey", "vol"):
        p = aligned[f]
        chars[_CHAR_OF_FIELD[f]] = lag(p, FUNDAMENTAL_LAG) if f in FUNDAMENTAL_FIELDS else p
    chars["MOML"] = momentum(returns, 12, 1)
    chars["MOMS"] = momentum(returns, 3, 1)
    aligned_raw = RawDataset(**aligned, ncd_yield=ncd)
    return Dataset(
        raw=aligned_raw,
        characteristics=CharacteristicSet(chars),
        returns=returns,
        ncd_index=ncd_index(ncd),
        overrides=tuple(overrides),
    )


def load_dataset(directory, overrides=None) -> Dataset:
    """Read a dataset directory (see module docstring) and build it.

    ``overrides`` may be a path or a list of :class:`Override`; when omitted,
    ``overrides.csv`` inside the directory is used if present.
    """
    directory = Path(directory)
    panels = {f: read_wide_csv(directory / f"{f}.csv") for f in FIELDS}
    ncd = read_ncd_csv(directory / "ncd.csv")
    if overrides is None:
        default = directory / "overrides.csv"
        overrides = read_overrides(default) if default.exists() else []
    elif isinstance(overrides, (str, Path)):
        overrides = read_overrides(overrides)
    return build_dataset(RawDataset(**panels, ncd_yield=ncd), overrides)
