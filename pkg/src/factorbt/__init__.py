"""Predictive APT and characteristic-based factor models on monthly equity panels."""

__version__ = "0.1.0"

from .backtest import run_backtest, symmetric_quantile
from .factors import FactorSeries, SortSpec, build_factor_series
from .ingest import Dataset, RawDataset, load_dataset
from .models import AptModel, AptSpec, CbmSpec, CharacteristicModel
from .panel import CharacteristicSet, MonthStamp, Panel, align, lag
from .preprocess import CrossSectionalStandardizer, ZScorePolicy, standardize
from .regress import OlsResult, ols, rolling_ols
from .synth import SynthSpec, generate
from .universe import UniverseSpec, market_index, select_universe

__all__ = [
    "AptModel",
    "AptSpec",
    "CbmSpec",
    "CharacteristicModel",
    "CharacteristicSet",
    "CrossSectionalStandardizer",
    "Dataset",
    "FactorSeries",
    "MonthStamp",
    "OlsResult",
    "Panel",
    "RawDataset",
    "SortSpec",
    "SynthSpec",
    "UniverseSpec",
    "ZScorePolicy",
    "align",
    "build_factor_series",
    "generate",
    "lag",
    "load_dataset",
    "market_index",
    "ols",
    "rolling_ols",
    "run_backtest",
    "select_universe",
    "standardize",
    "symmetric_quantile",
]
