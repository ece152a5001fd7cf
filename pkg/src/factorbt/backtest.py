"""Out-of-sample quantile backtests on expected-return forecasts."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .panel import Panel, PanelError
from .regress import ols
from .universe import UniverseMask

UNASSIGNED = 0


def bin_sizes(n: int, q: int) -> list[int]:
    """Bin sizes for ``n`` ranked stocks in ``q`` bins, grown middle-out.

    Every bin gets ``n // q``.  Leftover slots go to the middle bin first
    when the remainder is odd and ``q`` is odd, then to pairs mirrored about
    the centre, moving outwards.  With even ``q`` and an odd remainder no
    mirrored profile exists; the unpaired slot goes to the next bin in the
    pair order (upper member of the next pair).
    """
    if q < 2:
        raise ValueError("need at least two bins")
    if n <= 0:
        return [0] * q
    base, r = divmod(n, q)
    sizes = [base] * q
    if q % 2:
        mid = q // 2  # 0-based
        if r % 2:
            sizes[mid] += 1
            r -= 1
        k = 1
        while r:
            sizes[mid - k] += 1
            sizes[mid + k] += 1
            r -= 2
            k += 1
    else:
        lo, hi = q // 2 - 1, q // 2
        while r >= 2:
            sizes[lo] += 1
            sizes[hi] += 1
            lo, hi, r = lo - 1, hi + 1, r - 2
        if r:
            sizes[lo] += 1
    return sizes


def symmetric_quantile(values, q: int = 5, tickers: Sequence[str] | None = None) -> np.ndarray:
    """Bin labels 1..q (1 = highest value); MISSING (NaN) gets 0.

    Ties are ordered by ticker, alphabetically first ranked higher.
    """
    v = np.asarray(values, dtype=float)
    out = np.zeros(v.shape[0], dtype=int)
    idx = np.flatnonzero(np.isfinite(v))
    if idx.size == 0:
        return out
    if tickers is None:
        tie = idx
    else:
        tie = np.argsort(np.argsort(np.asarray(tickers, dtype=object)))[idx]
    order = idx[np.lexsort((tie, -v[idx]))]
    labels = np.repeat(np.arange(1, q + 1), bin_sizes(idx.size, q))
    out[order] = labels
    return out


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_se: float

    def as_dict(self) -> dict:
        return {k: (v if math.isfinite(v) else None) for k, v in
                (("slope", self.slope), ("intercept", self.intercept), ("slope_se", self.slope_se))}


@dataclass(frozen=True)
class QuintileStats:
    model: str
    start: object
    months: np.ndarray  # (T,) bool, months included in the evaluation
    assignments: np.ndarray  # (T, N) ints, 0 = unassigned
    log_returns: np.ndarray  # (T, Q), NaN where not evaluated or bin empty
    ann_return_pct: np.ndarray  # (Q,)
    ann_vol_pct: np.ndarray  # (Q,)
    n_months: np.ndarray  # (Q,)
    return_line: LineFit
    vol_line: LineFit

    @property
    def n_bins(self) -> int:
        return self.ann_return_pct.shape[0]


def _line(y: np.ndarray) -> LineFit:
    x = np.arange(1, y.shape[0] + 1, dtype=float)
    res = ols(y, x, include_intercept=True, min_dof=1)
    if not res.ok:
        return LineFit(math.nan, math.nan, math.nan)
    dof = res.n_used - 2
    resid = res.residuals[np.isfinite(res.residuals)]
    s2 = float(resid @ resid) / dof if dof > 0 else math.nan
    xu = x[np.isfinite(y)]
    se = math.sqrt(s2 / float(np.sum((xu - xu.mean()) ** 2))) if dof > 0 else math.nan
    return LineFit(float(res.coefficients[1]), float(res.coefficients[0]), se)


def _eligible(pred: np.ndarray, held: np.ndarray, q: int) -> np.ndarray:
    return (np.isfinite(pred) & held).sum(axis=1) >= q


def run_backtest(
    expected: Mapping[str, Panel],
    realized: Panel,
    mask: UniverseMask | None = None,
    q: int = 5,
    weighting: str = "equal",
    mv: Panel | None = None,
    common_window: bool = True,
) -> dict[str, QuintileStats]:
    """Sort stocks on forecasts each month and track the bin portfolios.

    At month t stocks held in the universe (selected at t-1) are binned on
    their forecast for t; each bin earns the equal- or cap-weighted (MV at
    t-1) simple return of members with a realised return, recorded as a
    log return.  Annualised return is 12x the mean monthly log return and
    volatility sqrt(12)x its sample std.  With ``common_window`` every model
    is scored over the months in which all of them have forecasts.
    """
    if weighting not in ("equal", "cap"):
        raise ValueError("weighting must be 'equal' or 'cap'")
    if weighting == "cap" and mv is None:
        raise ValueError("cap weighting needs market values")
    T, N = realized.shape
    held = mask.lagged() if mask is not None else np.ones((T, N), dtype=bool)
    held[0] = False  # nothing is formed before the first month
    r = realized.array
    w_all = mv.array if mv is not None else None

    preds = {}
    for name, panel in expected.items():
        if not panel.same_axes(realized):
            raise PanelError(f"forecasts for {name!r} are not aligned with returns")
        pred = panel.array
        pred[~held] = np.nan
        if not _eligible(pred, held, q).any():
            raise ValueError(f"model {name!r} has no month with usable forecasts")
        preds[name] = pred
    months = {name: _eligible(p, held, q) for name, p in preds.items()}
    if common_window:
        common = np.logical_and.reduce(list(months.values()))
        if not common.any():
            raise ValueError("models share no month with usable forecasts")
        months = {name: common for name in months}

    out = {}
    for name, pred in preds.items():
        use = months[name]
        assign = np.zeros((T, N), dtype=int)
        series = np.full((T, q), np.nan)
        for t in np.flatnonzero(use):
            assign[t] = symmetric_quantile(pred[t], q, realized.stocks)
            for b in range(1, q + 1):
                sel = (assign[t] == b) & np.isfinite(r[t])
                if weighting == "cap":
                    sel &= np.isfinite(w_all[t - 1]) & (w_all[t - 1] > 0)
                if not sel.any():
                    continue
                if weighting == "cap":
                    w = w_all[t - 1, sel] / w_all[t - 1, sel].sum()
                    simple = float(w @ np.expm1(r[t, sel]))
                else:
                    simple = float(np.mean(np.expm1(r[t, sel])))
                series[t, b - 1] = math.log1p(simple)
        ann_ret = np.full(q, np.nan)
        ann_vol = np.full(q, np.nan)
        n_months = np.zeros(q, dtype=int)
        for b in range(q):
            x = series[:, b][np.isfinite(series[:, b])]
            n_months[b] = x.size
            if x.size:
                ann_ret[b] = 12.0 * x.mean() * 100.0
            if x.size > 1:
                ann_vol[b] = math.sqrt(12.0) * x.std(ddof=1) * 100.0
        out[name] = QuintileStats(
            model=name,
            start=realized.start,
            months=use,
            assignments=assign,
            log_returns=series,
            ann_return_pct=ann_ret,
            ann_vol_pct=ann_vol,
            n_months=n_months,
            return_line=_line(ann_ret),
            vol_line=_line(ann_vol),
        )
    return out


def _fmt(x: float) -> str:
    return "" if not np.isfinite(x) else repr(float(x))


def write_quintiles(stats: Mapping[str, QuintileStats], directory) -> None:
    """``quintiles.csv``, ``quintile_series.csv`` and ``quintiles_fit.json``."""
    directory = Path(directory)
    with (directory / "quintiles.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "bin", "ann_return_pct", "ann_vol_pct"])
        for name, s in stats.items():
            for b in range(s.n_bins):
                w.writerow([name, b + 1, _fmt(s.ann_return_pct[b]), _fmt(s.ann_vol_pct[b])])
    with (directory / "quintile_series.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "bin", "date", "log_return"])
        for name, s in stats.items():
            for b in range(s.n_bins):
                for t in np.flatnonzero(np.isfinite(s.log_returns[:, b])):
                    w.writerow([name, b + 1, str(s.start + int(t)), _fmt(s.log_returns[t, b])])
    fits = {
        name: {
            "return_vs_bin": s.return_line.as_dict(),
            "vol_vs_bin": s.vol_line.as_dict(),
            "n_months": int(s.months.sum()),
        }
        for name, s in stats.items()
    }
    text = json.dumps(fits, indent=2, sort_keys=True)
    (directory / "quintiles_fit.json").write_text(text + "\n", encoding="utf-8")
