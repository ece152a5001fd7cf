"""Monthly calendars and missing-aware date x stock panels.

Every other module passes data around as :class:`Panel` objects.  A panel
keeps a float grid together with a boolean validity mask; a cell whose mask
is false is MISSING.  Non-finite input values are converted to MISSING on
construction, so NaN and infinities never live inside a panel.  For
vectorised arithmetic, :attr:`Panel.array` hands out a NaN-filled copy.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import pandas as pd

EPOCH_YEAR = 1990

#: Recognised characteristic keys.  ``mkt_loading`` is derived, not ingested.
CHARACTERISTIC_KEYS = ("BTP", "MV", "DY", "EY", "VOL", "MOML", "MOMS")

_MONTH_RE = re.compile(r"^\s*(\d{4})-(\d{2})\s*$")


class PanelError(ValueError):
    """Raised on axis mismatches and malformed panel construction."""


@dataclass(frozen=True, order=True)
class MonthStamp:
    """A calendar month, counted from January 1990."""

    index: int

    @classmethod
    def parse(cls, text: str) -> "MonthStamp":
        m = _MONTH_RE.match(text)
        if m is None:
            raise ValueError(f"not an ISO year-month: {text!r}")
        year, month = int(m.group(1)), int(m.group(2))
        if not 1 <= month <= 12:
            raise ValueError(f"month out of range: {text!r}")
        return cls.from_ym(year, month)

    @classmethod
    def from_ym(cls, year: int, month: int) -> "MonthStamp":
        return cls((year - EPOCH_YEAR) * 12 + (month - 1))

    @property
    def year(self) -> int:
        return EPOCH_YEAR + self.index // 12

    @property
    def month(self) -> int:
        return self.index % 12 + 1

    def next(self) -> "MonthStamp":
        return MonthStamp(self.index + 1)

    def __add__(self, months: int) -> "MonthStamp":
        return MonthStamp(self.index + int(months))

    def __sub__(self, other):
        if isinstance(other, MonthStamp):
            return self.index - other.index
        return MonthStamp(self.index - int(other))

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    def __repr__(self) -> str:
        return f"MonthStamp({self})"


def _as_month(value) -> MonthStamp:
    if isinstance(value, MonthStamp):
        return value
    if isinstance(value, str):
        return MonthStamp.parse(value)
    if isinstance(value, pd.Period):
        return MonthStamp.from_ym(value.year, value.month)
    if hasattr(value, "year") and hasattr(value, "month"):
        return MonthStamp.from_ym(value.year, value.month)
    raise TypeError(f"cannot interpret {value!r} as a month")


class Panel:
    """Immutable dates x stocks grid with first-class missing cells.

    Parameters
    ----------
    start : MonthStamp or str
        First date; the remaining rows follow contiguously.
    stocks : sequence of str
        Column labels, unique and non-empty.
    values : array_like, shape (n_dates, n_stocks)
        Cell values.  NaN and +/-inf become MISSING.
    valid : array_like of bool, optional
        Extra validity mask, combined with finiteness.
    """

    __slots__ = ("_start", "_stocks", "_values", "_valid", "_col")

    def __init__(self, start, stocks: Sequence[str], values, valid=None):
        start = _as_month(start)
        stocks = tuple(str(s) for s in stocks)
        if any(not s for s in stocks):
            raise PanelError("stock identifiers must be non-empty")
        if len(set(stocks)) != len(stocks):
            dupes = sorted({s for s in stocks if stocks.count(s) > 1})
            raise PanelError(f"duplicate stock identifiers: {dupes}")
        arr = np.array(values, dtype=float, copy=True)
        if arr.ndim == 1 and len(stocks) == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] != len(stocks):
            raise PanelError(
                f"values shape {arr.shape} does not match {len(stocks)} stocks"
            )
        mask = np.isfinite(arr)
        if valid is not None:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != arr.shape:
                raise PanelError("valid mask shape mismatch")
            mask &= valid
        arr[~mask] = 0.0
        arr.setflags(write=False)
        mask.setflags(write=False)
        self._start = start
        self._stocks = stocks
        self._values = arr
        self._valid = mask
        self._col = None

    # -- construction helpers ------------------------------------------
    @classmethod
    def missing(cls, start, n_dates: int, stocks: Sequence[str]) -> "Panel":
        return cls(start, stocks, np.full((n_dates, len(stocks)), np.nan))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "Panel":
        """Build from a DataFrame indexed by contiguous months."""
        months = [_as_month(v) for v in frame.index]
        check_contiguous(months)
        start = months[0] if months else MonthStamp(0)
        return cls(start, [str(c) for c in frame.columns], frame.to_numpy(dtype=float))

    def to_frame(self) -> pd.DataFrame:
        index = pd.PeriodIndex([str(d) for d in self.dates], freq="M", name="date")
        return pd.DataFrame(self.array, index=index, columns=list(self._stocks))

    def with_values(self, values, valid=None) -> "Panel":
        """Same axes, new cells."""
        return Panel(self._start, self._stocks, values, valid)

    # -- axes ------------------------------------------------------------
    @property
    def start(self) -> MonthStamp:
        return self._start

    @property
    def end(self) -> MonthStamp:
        return self._start + (self.n_dates - 1)

    @property
    def dates(self) -> tuple[MonthStamp, ...]:
        return tuple(self._start + k for k in range(self.n_dates))

    @property
    def stocks(self) -> tuple[str, ...]:
        return self._stocks

    @property
    def n_dates(self) -> int:
        return self._values.shape[0]

    @property
    def n_stocks(self) -> int:
        return self._values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    # -- cells -----------------------------------------------------------
    @property
    def valid(self) -> np.ndarray:
        """Read-only boolean mask, True where a value is present."""
        return self._valid

    @property
    def array(self) -> np.ndarray:
        """Writable float copy with NaN in MISSING cells."""
        out = self._values.copy()
        out[~self._valid] = np.nan
        return out

    def row_of(self, date) -> int:
        k = _as_month(date) - self._start
        if not 0 <= k < self.n_dates:
            raise KeyError(f"{date} outside {self._start}..{self.end}")
        return k

    def col_of(self, stock: str) -> int:
        if self._col is None:
            self._col = {s: j for j, s in enumerate(self._stocks)}
        try:
            return self._col[stock]
        except KeyError:
            raise KeyError(f"unknown stock {stock!r}") from None

    def cell(self, date, stock: str) -> float | None:
        """Value at (date, stock); ``None`` marks MISSING."""
        i, j = self.row_of(date), self.col_of(stock)
        return float(self._values[i, j]) if self._valid[i, j] else None

    def column(self, stock: str) -> np.ndarray:
        """One stock's series as a NaN-filled float array."""
        return self.array[:, self.col_of(stock)]

    def select_stocks(self, stocks: Sequence[str]) -> "Panel":
        """Reindex columns; stocks absent from this panel come back MISSING."""
        arr = np.full((self.n_dates, len(stocks)), np.nan)
        src = self.array
        for j, s in enumerate(stocks):
            if s in self._index_map():
                arr[:, j] = src[:, self._col[s]]
        return Panel(self._start, stocks, arr)

    def slice_dates(self, first, last) -> "Panel":
        i0, i1 = self.row_of(first), self.row_of(last)
        return Panel(first, self._stocks, self.array[i0 : i1 + 1])

    def _index_map(self) -> dict:
        if self._col is None:
            self._col = {s: j for j, s in enumerate(self._stocks)}
        return self._col

    def same_axes(self, other: "Panel") -> bool:
        return (
            self._start == other._start
            and self.n_dates == other.n_dates
            and self._stocks == other._stocks
        )

    def equals(self, other: "Panel", atol: float = 0.0) -> bool:
        """Cell-wise equality, MISSING matching MISSING."""
        if not self.same_axes(other):
            return False
        if not np.array_equal(self._valid, other._valid):
            return False
        if atol == 0.0:
            return bool(np.array_equal(self._values, other._values))
        return bool(np.allclose(self._values, other._values, rtol=0.0, atol=atol))

    def missing_fraction(self) -> float:
        return float(1.0 - self._valid.mean()) if self._valid.size else 0.0

    def __repr__(self) -> str:
        return (
            f"Panel({self._start}..{self.end}, {self.n_stocks} stocks, "
            f"{self.missing_fraction():.1%} missing)"
        )


def check_contiguous(months: Sequence[MonthStamp]) -> None:
    for a, b in zip(months, months[1:]):
        if b.index != a.index + 1:
            if b.index <= a.index:
                raise PanelError(f"dates not increasing at {a} -> {b}")
            raise PanelError(f"gap in monthly dates between {a} and {b}")


class CharacteristicSet(Mapping):
    """Named characteristic panels that share identical axes."""

    def __init__(self, panels: Mapping[str, Panel]):
        self._panels = dict(panels)
        items = list(self._panels.items())
        if items:
            ref_key, ref = items[0]
            for key, p in items[1:]:
                if not p.same_axes(ref):
                    raise PanelError(
                        f"characteristic {key!r} axes differ from {ref_key!r}"
                    )

    def __getitem__(self, key: str) -> Panel:
        try:
            return self._panels[key]
        except KeyError:
            raise KeyError(f"unknown characteristic {key!r}") from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._panels)

    def __len__(self) -> int:
        return len(self._panels)

    def with_panel(self, key: str, panel: Panel) -> "CharacteristicSet":
        out = dict(self._panels)
        out[key] = panel
        return CharacteristicSet(out)

    def subset(self, keys: Iterable[str]) -> "CharacteristicSet":
        return CharacteristicSet({k: self[k] for k in keys})

    def map(self, fn) -> "CharacteristicSet":
        return CharacteristicSet({k: fn(p) for k, p in self._panels.items()})

    def __repr__(self) -> str:
        return f"CharacteristicSet({list(self._panels)})"


def align(panels: Sequence[Panel]) -> list[Panel]:
    """Trim panels to their common dates and widen them to the union of stocks.

    Stock order follows first appearance across ``panels``.  Stocks a panel
    lacks are filled with MISSING.
    """
    panels = list(panels)
    if not panels:
        return []
    first = max(p.start for p in panels)
    last = min(p.end for p in panels)
    if last < first or any(p.n_dates == 0 for p in panels):
        raise PanelError("no overlapping dates")
    stocks: list[str] = []
    seen: set[str] = set()
    for p in panels:
        for s in p.stocks:
            if s not in seen:
                seen.add(s)
                stocks.append(s)
    out = []
    for p in panels:
        if p.start == first and p.end == last and list(p.stocks) == stocks:
            out.append(p)
            continue
        trimmed = p.slice_dates(first, last)
        out.append(trimmed if list(p.stocks) == stocks else trimmed.select_stocks(stocks))
    return out


def lag(p: Panel, k: int) -> Panel:
    """Shift values ``k`` months forward in time: out[t] = in[t - k]."""
    if k < 0:
        raise ValueError("lag must be non-negative")
    if k == 0:
        return p
    arr = np.full(p.shape, np.nan)
    if k < p.n_dates:
        arr[k:] = p.array[:-k]
    return p.with_values(arr)
