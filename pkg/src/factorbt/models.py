"""Predictive risk-factor (APT) and characteristic-based (CBM) models.

APT: per stock, rolling time-series regressions of excess returns on factor
returns; the forecast for month t applies the loadings estimated through
t-1 to the factor realisations of t-1 and adds back the cash rate.

CBM: per month, a cross-sectional regression of returns on the previous
month's z-scored characteristics; the forecast applies trailing means of
the estimated payoffs to the latest characteristics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .factors import FactorSeries
from .panel import CharacteristicSet, MonthStamp, Panel
from .regress import MIN_DOF, ols, rolling_ols_panel
from .validation import check_characteristics, check_panel, check_same_dates

APT_FACTORS = ("mkt_excess", "smb", "hml", "mkt")
CBM_KEYS = ("BTP", "MV", "DY", "EY", "VOL", "MOML", "MOMS", "mkt_loading")

# Characteristic sets of the fourteen reference models, in report order.
# Rows 4 and 5 list the same columns in the source table; both are kept.
TABLE1_MODELS: dict[int, tuple[str, ...]] = {
    1: ("BTP", "MV"),
    2: ("BTP", "MV", "mkt_loading"),
    3: ("BTP", "MV", "MOML"),
    4: ("BTP", "MV", "mkt_loading", "MOML"),
    5: ("BTP", "MV", "mkt_loading", "MOML"),
    6: ("BTP", "MV", "mkt_loading", "MOML", "MOMS"),
    7: ("BTP", "MV", "mkt_loading", "MOML", "MOMS", "VOL"),
    8: ("BTP", "MV", "mkt_loading", "VOL"),
    9: ("BTP", "MV", "mkt_loading", "MOML", "MOMS", "EY"),
    10: ("BTP", "MV", "EY"),
    11: ("BTP", "MV", "MOML", "MOMS", "EY", "DY"),
    12: ("BTP", "MV", "DY"),
    13: ("BTP", "MV", "mkt_loading", "MOML", "MOMS", "DY"),
    14: ("BTP", "MV", "mkt_loading", "MOML", "MOMS", "EY", "DY"),
}

#: Report column for each characteristic, in table order.
TABLE1_COLUMNS = {
    "BTP": "delta_BVTP",
    "MV": "delta_MV",
    "mkt_loading": "delta_Mkt",
    "MOML": "delta_MOML",
    "MOMS": "delta_MOMS",
    "EY": "delta_EY",
    "DY": "delta_DY",
    "VOL": "delta_VOL",
}


@dataclass(frozen=True)
class AptSpec:
    factors: tuple[str, ...] = ("mkt_excess", "smb", "hml")
    window: int = 72
    excess_returns: bool = True

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("an APT model needs at least one factor")
        bad = [f for f in self.factors if f not in APT_FACTORS]
        if bad:
            raise ValueError(f"unknown APT factors {bad}")


CAPM = AptSpec(("mkt_excess",))
FF3 = AptSpec(("mkt_excess", "smb", "hml"))


@dataclass(frozen=True)
class CbmSpec:
    characteristics: tuple[str, ...] = ("BTP", "MV")
    smoothing_window: int = 12

    def __post_init__(self):
        object.__setattr__(self, "characteristics", tuple(self.characteristics))
        if not self.characteristics:
            raise ValueError("a CBM needs at least one characteristic")
        bad = [k for k in self.characteristics if k not in CBM_KEYS]
        if bad:
            raise ValueError(f"unknown characteristics {bad}")
        if self.smoothing_window < 1:
            raise ValueError("smoothing_window must be >= 1")


@dataclass(frozen=True)
class RollingFit:
    """Loadings dated t, estimated from the window ending at t-1."""

    start: MonthStamp
    stocks: tuple[str, ...]
    factors: tuple[str, ...]
    alpha: np.ndarray  # (T, N)
    betas: np.ndarray  # (T, N, K)
    ok: np.ndarray  # (T, N)
    excess_returns: bool = True

    def beta(self, factor: str) -> np.ndarray:
        return self.betas[:, :, self.factors.index(factor)]


@dataclass(frozen=True)
class CrossSectionFit:
    """Per-month intercept and payoffs, in return units (not percent)."""

    start: MonthStamp
    characteristics: tuple[str, ...]
    alpha: np.ndarray  # (T,)
    deltas: np.ndarray  # (T, K)
    n_used: np.ndarray  # (T,)
    ok: np.ndarray  # (T,)
    condition_number: np.ndarray = field(default=None)

    @property
    def n_dates(self) -> int:
        return self.alpha.shape[0]

    @property
    def dates(self):
        return tuple(self.start + k for k in range(self.n_dates))

    def delta(self, key: str) -> np.ndarray:
        return self.deltas[:, self.characteristics.index(key)]

    def medians_pct(self) -> dict[str, float]:
        """Median intercept and payoffs over ok months, in percent."""
        sel = self.ok
        out = {"alpha": _median(self.alpha[sel]) * 100.0}
        for j, k in enumerate(self.characteristics):
            out[k] = _median(self.deltas[sel, j]) * 100.0
        return out


@dataclass(frozen=True)
class ExpectedParams:
    """Smoothed intercept / payoffs dated t, built from fits dated <= t-1."""

    start: MonthStamp
    characteristics: tuple[str, ...]
    alpha: np.ndarray
    deltas: np.ndarray


def _median(x: np.ndarray) -> float:
    return float(np.median(x)) if x.size else math.nan


# ---------------------------------------------------------------------------
# APT


def _factor_matrix(factors: FactorSeries, keys) -> np.ndarray:
    return np.column_stack([factors[k] for k in keys])


def fit_apt(returns: Panel, factors: FactorSeries, spec: AptSpec = FF3) -> RollingFit:
    """Rolling regressions of (excess) stock returns on factor returns."""
    check_panel(returns, "returns")
    check_same_dates(returns, factors.panel, "returns and factors")
    Y = returns.array
    if spec.excess_returns:
        Y = Y - factors["rfr"][:, None]
    X = _factor_matrix(factors, spec.factors)
    coef, ok, _ = rolling_ols_panel(Y, X, spec.window)
    return RollingFit(
        start=returns.start,
        stocks=returns.stocks,
        factors=spec.factors,
        alpha=coef[:, :, 0],
        betas=coef[:, :, 1:],
        ok=ok,
        excess_returns=spec.excess_returns,
    )


def predict_apt(fit: RollingFit, factors: FactorSeries, date=None):
    """Forecasts ``alpha + sum(beta * f[t-1]) (+ rfr[t-1])``.

    With ``date`` given, returns the cross-section for that month as a float
    array (NaN = MISSING); otherwise a panel over all dates.
    """
    X = _factor_matrix(factors, fit.factors)
    T = fit.alpha.shape[0]
    prev = np.full_like(X, np.nan)
    prev[1:] = X[:-1]
    pred = fit.alpha + np.einsum("tnk,tk->tn", fit.betas, prev)
    if fit.excess_returns:
        rfr_prev = np.full(T, np.nan)
        rfr_prev[1:] = factors["rfr"][:-1]
        pred = pred + rfr_prev[:, None]
    pred[~fit.ok] = np.nan
    if date is not None:
        k = MonthStamp.parse(date).index if isinstance(date, str) else date.index
        return pred[k - fit.start.index]
    return Panel(fit.start, fit.stocks, pred)


def trailing_capm_beta(returns: Panel, factors: FactorSeries, window: int = 36) -> Panel:
    """Per-stock CAPM beta usable as a characteristic.

    The value dated s comes from the window of excess returns ending at s
    (inclusive), so it is an observation available at s.
    """
    Y = returns.array - factors["rfr"][:, None]
    x = factors["mkt_excess"]
    Y = np.vstack([Y, np.full((1, Y.shape[1]), np.nan)])
    x = np.append(x, np.nan)
    coef, ok, _ = rolling_ols_panel(Y, x[:, None], window)
    beta = np.where(ok, coef[:, :, 1], np.nan)[1:]
    return returns.with_values(beta)


# ---------------------------------------------------------------------------
# CBM


def fit_cbm(returns: Panel, cs: CharacteristicSet, spec: CbmSpec = CbmSpec(), min_dof: int = MIN_DOF) -> CrossSectionFit:
    """Monthly regressions of returns at t on characteristics dated t-1.

    ``cs`` should already be standardised; cells outside the universe are
    expected to be MISSING there.
    """
    check_panel(returns, "returns")
    check_characteristics(cs, spec.characteristics)
    keys = spec.characteristics
    theta = np.stack([cs[k].array for k in keys], axis=-1)  # (T, N, K)
    if theta.shape[:2] != returns.shape:
        raise ValueError("characteristics and returns are not aligned")
    R = returns.array
    T, K = R.shape[0], len(keys)
    alpha = np.full(T, np.nan)
    deltas = np.full((T, K), np.nan)
    n_used = np.zeros(T, dtype=int)
    ok = np.zeros(T, dtype=bool)
    cond = np.full(T, np.nan)
    for t in range(1, T):
        res = ols(R[t], theta[t - 1], include_intercept=True, min_dof=min_dof)
        n_used[t] = res.n_used
        cond[t] = res.condition_number
        if res.ok:
            ok[t] = True
            alpha[t] = res.coefficients[0]
            deltas[t] = res.coefficients[1:]
    return CrossSectionFit(returns.start, keys, alpha, deltas, n_used, ok, cond)


def smooth_expectation(fit: CrossSectionFit, window: int = 12) -> ExpectedParams:
    """Trailing mean of the estimates dated t-window .. t-1.

    Needs at least ``window / 2`` ok months in the window, else NaN.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    T = fit.n_dates
    params = np.column_stack([fit.alpha, fit.deltas])
    alpha = np.full(T, np.nan)
    deltas = np.full(fit.deltas.shape, np.nan)
    for t in range(1, T):
        lo = max(0, t - window)
        sel = fit.ok[lo:t]
        if 2 * sel.sum() < window:
            continue
        m = params[lo:t][sel].mean(axis=0)
        alpha[t], deltas[t] = m[0], m[1:]
    return ExpectedParams(fit.start, fit.characteristics, alpha, deltas)


def predict_cbm(params: ExpectedParams, cs: CharacteristicSet, date=None):
    """Forecasts ``E[alpha] + sum(E[delta_k] * theta_k[t-1])``."""
    check_characteristics(cs, params.characteristics)
    theta = np.stack([cs[k].array for k in params.characteristics], axis=-1)
    prev = np.full_like(theta, np.nan)
    prev[1:] = theta[:-1]
    pred = params.alpha[:, None] + np.einsum("tnk,tk->tn", prev, params.deltas)
    ref = cs[params.characteristics[0]]
    if date is not None:
        k = MonthStamp.parse(date).index if isinstance(date, str) else date.index
        return pred[k - ref.start.index]
    return ref.with_values(pred)


def table1_suite(returns: Panel, cs: CharacteristicSet, models=None, min_dof: int = MIN_DOF):
    """Median payoffs (percent per month per z-unit) for each model.

    Returns ``(rows, fits)``: one dict per model with ``model``, ``alpha``
    and the ``TABLE1_COLUMNS`` entries present, plus the fits keyed by model.
    """
    models = TABLE1_MODELS if models is None else models
    rows, fits = [], {}
    for number, keys in models.items():
        fit = fit_cbm(returns, cs, CbmSpec(keys), min_dof=min_dof)
        fits[number] = fit
        med = fit.medians_pct()
        row = {"model": number, "alpha": med["alpha"]}
        for k in keys:
            row[TABLE1_COLUMNS[k]] = med[k]
        rows.append(row)
    return rows, fits


# ---------------------------------------------------------------------------
# estimator front-ends


class AptModel(BaseEstimator):
    """Rolling-window factor model with one-step-ahead forecasts.

    ``fit(X, y)`` takes a :class:`FactorSeries` and a returns panel;
    ``predict(X)`` returns a panel of expected returns dated like ``y``.
    """

    def __init__(self, factors=("mkt_excess", "smb", "hml"), window: int = 72, excess_returns: bool = True):
        self.factors = factors
        self.window = window
        self.excess_returns = excess_returns

    def fit(self, X: FactorSeries, y: Panel):
        spec = AptSpec(tuple(self.factors), self.window, self.excess_returns)
        self.fit_ = fit_apt(y, X, spec)
        return self

    def predict(self, X: FactorSeries) -> Panel:
        check_is_fitted(self, "fit_")
        return predict_apt(self.fit_, X)


class CharacteristicModel(BaseEstimator):
    """Cross-sectional payoff model with trailing-mean payoff forecasts.

    ``fit(X, y)`` takes standardised characteristics and returns;
    ``predict(X)`` applies the smoothed payoffs to ``X``.
    """

    def __init__(self, characteristics=("BTP", "MV"), smoothing_window: int = 12, min_dof: int = MIN_DOF):
        self.characteristics = characteristics
        self.smoothing_window = smoothing_window
        self.min_dof = min_dof

    def fit(self, X: CharacteristicSet, y: Panel):
        spec = CbmSpec(tuple(self.characteristics), self.smoothing_window)
        self.fit_ = fit_cbm(y, X, spec, min_dof=self.min_dof)
        self.expected_ = smooth_expectation(self.fit_, spec.smoothing_window)
        return self

    def predict(self, X: CharacteristicSet) -> Panel:
        check_is_fitted(self, "expected_")
        return predict_cbm(self.expected_, X)
