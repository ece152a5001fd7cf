"""Top-N universe selection and the synthetic cap-weighted market index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .panel import MonthStamp, Panel, PanelError


@dataclass(frozen=True)
class UniverseSpec:
    top_n: int = 250

    def __post_init__(self):
        if self.top_n < 2:
            raise ValueError("top_n must be at least 2")


class UniverseMask:
    """Boolean dates x stocks membership grid."""

    def __init__(self, start: MonthStamp, stocks, members: np.ndarray):
        self.start = start
        self.stocks = tuple(stocks)
        members = np.array(members, dtype=bool)
        members.setflags(write=False)
        self.members = members

    @property
    def shape(self):
        return self.members.shape

    def counts(self) -> np.ndarray:
        return self.members.sum(axis=1)

    def restrict(self, p: Panel) -> Panel:
        """Blank out cells of non-members."""
        if p.start != self.start or p.stocks != self.stocks or p.shape != self.shape:
            raise PanelError("universe mask and panel axes differ")
        return p.with_values(p.array, valid=self.members)

    def lagged(self) -> np.ndarray:
        """Membership held over each month: row t is the selection made at t-1."""
        out = np.zeros_like(self.members)
        out[1:] = self.members[:-1]
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, UniverseMask)
            and self.start == other.start
            and self.stocks == other.stocks
            and np.array_equal(self.members, other.members)
        )


def select_universe(mv: Panel, spec: UniverseSpec | int = UniverseSpec()) -> UniverseMask:
    """Each month, the ``top_n`` largest stocks by (lagged) market value.

    Ties go to the alphabetically first ticker.  Months with fewer valid
    market values keep every valid stock.
    """
    if isinstance(spec, int):
        spec = UniverseSpec(spec)
    x, ok = mv.array, mv.valid
    members = np.zeros(mv.shape, dtype=bool)
    ticker_rank = np.argsort(np.argsort(np.array(mv.stocks, dtype=object)))
    for t in range(mv.n_dates):
        idx = np.flatnonzero(ok[t])
        if idx.size <= spec.top_n:
            members[t, idx] = True
            continue
        # lexsort: last key is primary
        order = np.lexsort((ticker_rank[idx], -x[t, idx]))
        members[t, idx[order[: spec.top_n]]] = True
    return UniverseMask(mv.start, mv.stocks, members)


def weighted_simple_return(r: np.ndarray, w: np.ndarray) -> float:
    """Weighted mean of simple returns from log returns ``r``; NaN if empty."""
    if r.size == 0 or not np.sum(w) > 0:
        return np.nan
    return float(np.dot(w / np.sum(w), np.expm1(r)))


def market_index(returns: Panel, mv: Panel, mask: UniverseMask) -> Panel:
    """Monthly log returns of the universe's cap-weighted portfolio.

    Month t holds the members selected at t-1 weighted by their t-1 market
    values; only members with a return at t count.  Returns a one-column
    panel named ``mkt``.
    """
    if not returns.same_axes(mv):
        raise PanelError("returns and market value axes differ")
    r, w = returns.array, mv.array
    held = mask.lagged()
    out = np.full(returns.n_dates, np.nan)
    for t in range(1, returns.n_dates):
        use = held[t] & np.isfinite(r[t]) & np.isfinite(w[t - 1]) & (w[t - 1] > 0)
        simple = weighted_simple_return(r[t, use], w[t - 1, use])
        if np.isfinite(simple):
            out[t] = np.log1p(simple)
    return Panel(returns.start, ("mkt",), out[:, None])
