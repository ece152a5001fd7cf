"""Size x value intersection portfolios and the SMB / HML spreads."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .panel import Panel, PanelError
from .universe import UniverseMask, market_index, weighted_simple_return

PORTFOLIOS = ("HS", "MS", "LS", "HB", "MB", "LB")
FACTOR_COLUMNS = ("mkt", "rfr", "smb", "hml")


@dataclass(frozen=True)
class SortSpec:
    size_breakpoint: float = 50.0
    value_breakpoints: tuple[float, float] = (30.0, 70.0)
    weighting: str = "cap"

    def __post_init__(self):
        lo, hi = self.value_breakpoints
        if not 0 < lo < hi < 100:
            raise ValueError("value breakpoints must satisfy 0 < low < high < 100")
        if not 0 < self.size_breakpoint < 100:
            raise ValueError("size breakpoint must lie in (0, 100)")
        if self.weighting not in ("cap", "equal"):
            raise ValueError("weighting must be 'cap' or 'equal'")


def assign_buckets(btp: np.ndarray, mv: np.ndarray, spec: SortSpec = SortSpec()):
    """Size and value labels for one cross-section.

    Small means MV strictly below the size breakpoint; L and H are strictly
    below the low / above the high BTP breakpoint; everything else is M.
    Breakpoints use linear-interpolated percentiles of the same cross-section.
    """
    size_cut = np.percentile(mv, spec.size_breakpoint)
    lo_cut, hi_cut = np.percentile(btp, spec.value_breakpoints)
    size = np.where(mv < size_cut, "S", "B")
    value = np.where(btp < lo_cut, "L", np.where(btp > hi_cut, "H", "M"))
    return size, value


def six_portfolios(
    returns: Panel,
    btp: Panel,
    mv: Panel,
    mask: UniverseMask,
    spec: SortSpec = SortSpec(),
) -> Panel:
    """Monthly simple returns of the six size/value portfolios.

    Portfolios are formed at t-1 from universe members with valid BTP and MV
    at t-1 and a return at t (listwise), then held over month t.  Empty
    portfolios are MISSING.  Columns follow ``PORTFOLIOS``.
    """
    if not (returns.same_axes(btp) and returns.same_axes(mv)):
        raise PanelError("returns, btp and mv axes differ")
    r, b, m = returns.array, btp.array, mv.array
    held = mask.lagged()
    out = np.full((returns.n_dates, 6), np.nan)
    for t in range(1, returns.n_dates):
        use = held[t] & np.isfinite(r[t]) & np.isfinite(b[t - 1]) & np.isfinite(m[t - 1])
        if spec.weighting == "cap":
            use &= m[t - 1] > 0
        idx = np.flatnonzero(use)
        if idx.size == 0:
            continue
        size, value = assign_buckets(b[t - 1, idx], m[t - 1, idx], spec)
        for k, name in enumerate(PORTFOLIOS):
            sel = (value == name[0]) & (size == name[1])
            if not sel.any():
                continue
            w = m[t - 1, idx[sel]] if spec.weighting == "cap" else np.ones(sel.sum())
            out[t, k] = weighted_simple_return(r[t, idx[sel]], w)
    return Panel(returns.start, PORTFOLIOS, out)


def smb(six: Panel) -> Panel:
    """Small minus big, averaged over the three value buckets."""
    x = six.array
    col = {n: x[:, six.col_of(n)] for n in PORTFOLIOS}
    s = ((col["HS"] + col["MS"] + col["LS"]) - (col["HB"] + col["MB"] + col["LB"])) / 3.0
    return Panel(six.start, ("smb",), s[:, None])


def hml(six: Panel) -> Panel:
    """High minus low book-to-price, averaged over the two size buckets."""
    x = six.array
    col = {n: x[:, six.col_of(n)] for n in PORTFOLIOS}
    h = ((col["HB"] + col["HS"]) - (col["LB"] + col["LS"])) / 2.0
    return Panel(six.start, ("hml",), h[:, None])


class FactorSeries:
    """Monthly factor returns: ``mkt`` and ``rfr`` are log returns, ``smb``
    and ``hml`` simple spread returns."""

    def __init__(self, panel: Panel):
        missing = set(FACTOR_COLUMNS) - set(panel.stocks)
        if missing:
            raise PanelError(f"factor series lacks {sorted(missing)}")
        self.panel = panel

    @classmethod
    def from_arrays(cls, start, **cols) -> "FactorSeries":
        names = tuple(FACTOR_COLUMNS) + tuple(k for k in cols if k not in FACTOR_COLUMNS)
        return cls(Panel(start, names, np.column_stack([cols[n] for n in names])))

    @property
    def start(self):
        return self.panel.start

    @property
    def dates(self):
        return self.panel.dates

    @property
    def n_dates(self) -> int:
        return self.panel.n_dates

    def __getitem__(self, key: str) -> np.ndarray:
        if key == "mkt_excess":
            return self.panel.column("mkt") - self.panel.column("rfr")
        return self.panel.column(key)

    def cumulative(self) -> Panel:
        """Growth of one unit: log series compound via exp, spreads via (1 + r).

        MISSING months leave the level unchanged.
        """
        levels = []
        for name in FACTOR_COLUMNS:
            x = np.nan_to_num(self[name], nan=0.0)
            if name in ("mkt", "rfr"):
                levels.append(np.exp(np.cumsum(x)))
            else:
                levels.append(np.cumprod(1.0 + x))
        return Panel(self.start, FACTOR_COLUMNS, np.column_stack(levels))

    def to_csv(self, path) -> None:
        """Write ``date,mkt,rfr,smb,hml`` with cumulative levels appended."""
        cum = self.cumulative().array
        x = self.panel
        arr = x.array
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", *FACTOR_COLUMNS, *(f"cum_{c}" for c in FACTOR_COLUMNS)])
            for i, d in enumerate(self.dates):
                row = [str(d)]
                for c in FACTOR_COLUMNS:
                    v = arr[i, x.col_of(c)]
                    row.append("" if np.isnan(v) else repr(float(v)))
                row += [repr(float(v)) for v in cum[i]]
                w.writerow(row)


def build_factor_series(dataset, mask: UniverseMask, spec: SortSpec = SortSpec()) -> FactorSeries:
    """Market, cash, SMB and HML series for an ingested dataset."""
    returns = dataset.returns
    mkt = market_index(returns, dataset.mv, mask)
    six = six_portfolios(returns, dataset.btp, dataset.mv, mask, spec)
    rfr = dataset.ncd_index.column("ret")
    return FactorSeries.from_arrays(
        returns.start,
        mkt=mkt.column("mkt"),
        rfr=rfr,
        smb=smb(six).column("smb"),
        hml=hml(six).column("hml"),
    )
