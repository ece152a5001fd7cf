"""Cross-sectional winsorisation and z-scoring of characteristics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .panel import CharacteristicSet, Panel


@dataclass(frozen=True)
class ZScorePolicy:
    winsor_sigma: float = 3.0
    min_count: int = 10

    def __post_init__(self):
        if not self.winsor_sigma > 0:
            raise ValueError("winsor_sigma must be positive")
        if self.min_count < 3:
            raise ValueError("min_count must be at least 3")


def _row_moments(x: np.ndarray):
    """Per-row count, mean and sample std over non-NaN cells."""
    n = np.sum(~np.isnan(x), axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.where(n > 0, np.nansum(x, axis=1) / np.maximum(n, 1), np.nan)
        dev = x - mu[:, None]
        ss = np.nansum(dev * dev, axis=1)
        sd = np.sqrt(ss / np.maximum(n - 1, 1))
    return n, mu, sd


def winsorize_cross_section(p: Panel, policy: ZScorePolicy = ZScorePolicy()) -> Panel:
    """Clip each month's values to mean +/- ``winsor_sigma`` sample std.

    Moments come from the unclipped row (one pass).  Rows with fewer than
    ``min_count`` values become entirely MISSING.
    """
    x = p.array
    n, mu, sd = _row_moments(x)
    k = policy.winsor_sigma
    lo, hi = (mu - k * sd)[:, None], (mu + k * sd)[:, None]
    out = np.clip(x, lo, hi)
    out[n < policy.min_count] = np.nan
    return p.with_values(out)


def zscore_cross_section(p: Panel, policy: ZScorePolicy = ZScorePolicy()) -> Panel:
    """Standardise each month to zero mean, unit sample std.

    A row with zero spread maps to zeros; thin rows become MISSING.
    """
    x = p.array
    n, mu, sd = _row_moments(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = (x - mu[:, None]) / sd[:, None]
    flat = (sd == 0) & (n > 0)
    z[flat] = np.where(np.isnan(x[flat]), np.nan, 0.0)
    z[n < policy.min_count] = np.nan
    return p.with_values(z)


def standardize(cs: CharacteristicSet, policy: ZScorePolicy = ZScorePolicy()) -> CharacteristicSet:
    """Winsorise then z-score every characteristic panel."""
    return cs.map(lambda p: zscore_cross_section(winsorize_cross_section(p, policy), policy))


class CrossSectionalStandardizer(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`standardize`.

    Accepts a :class:`Panel` or a :class:`CharacteristicSet`.  Every month is
    treated on its own, so ``fit`` learns nothing.

    Parameters
    ----------
    winsor_sigma : float, default=3.0
    min_count : int, default=10
        Minimum valid observations per month; thinner months become MISSING.
    """

    def __init__(self, winsor_sigma: float = 3.0, min_count: int = 10):
        self.winsor_sigma = winsor_sigma
        self.min_count = min_count

    def fit(self, X, y=None):
        self.policy_ = ZScorePolicy(self.winsor_sigma, self.min_count)
        return self

    def transform(self, X):
        policy = getattr(self, "policy_", None) or ZScorePolicy(self.winsor_sigma, self.min_count)
        if isinstance(X, Panel):
            return zscore_cross_section(winsorize_cross_section(X, policy), policy)
        if isinstance(X, CharacteristicSet):
            return standardize(X, policy)
        raise TypeError(f"expected Panel or CharacteristicSet, got {type(X).__name__}")
