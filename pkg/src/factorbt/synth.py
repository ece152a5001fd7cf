"""Synthetic monthly equity panels with planted ground truth.

Random numbers come from numpy's PCG64 bit generator seeded with
``SynthSpec.seed``; draws happen in a fixed order, so a seed pins the
dataset bit for bit.

Modes
-----
``cbm``
    Log returns load on the previous month's z-scored characteristics with
    payoffs ``constant + amplitude * sin(2 pi t / period)``.  The z-scores
    are produced by the same lag / universe / standardisation path the
    pipeline uses, so a noiseless panel is fitted exactly.
``apt``
    Excess log returns are linear in generated factor paths (market excess,
    SMB, HML) with per-stock loadings.
``null``
    No planted effect beyond the optional size premium.

Every mode can add a common market shock ``beta_i * m_t`` and a premium
for stocks below the median lagged market value.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .factors import FactorSeries
from .ingest import FUNDAMENTAL_LAG, Dataset, RawDataset, build_dataset, write_dataset
from .panel import CharacteristicSet, MonthStamp, Panel
from .preprocess import ZScorePolicy, standardize
from .universe import select_universe

MODES = ("cbm", "apt", "null")
PLANTABLE = ("BTP", "MV", "DY", "EY", "VOL")

# field -> (log-level offset, log-level scale)
_LEVELS = {
    "btp": (-0.4, 0.5),
    "mv": (7.0, 1.2),
    "dy": (-3.5, 0.4),
    "ey": (-2.5, 0.4),
    "vol": (10.0, 1.0),
}
_FIELD_OF = {"BTP": "btp", "MV": "mv", "DY": "dy", "EY": "ey", "VOL": "vol"}


@dataclass(frozen=True)
class SynthSpec:
    n_stocks: int = 250
    n_months: int = 160
    seed: int = 0
    mode: str = "cbm"
    start: str = "1994-01"
    # cbm mode: key -> (constant, amplitude), monthly log-return units
    payoffs: dict = field(default_factory=lambda: {"BTP": (0.004, 0.002), "MV": (-0.0015, 0.0)})
    period: int = 48
    alpha: float = 0.01
    noise_sigma: float = 0.02
    rho: float = 0.9
    missing_rate: float = 0.0
    # common market shock, all modes except apt
    market_mean: float = 0.0
    market_sigma: float = 0.0
    beta_range: tuple = (0.0, 2.0)
    size_premium: float = 0.0
    # apt mode
    factor_mean: float = 0.005
    factor_sigma: float = 0.05
    apt_beta_range: tuple = (-0.5, 1.5)
    apt_alpha_sigma: float = 0.0
    # cash
    ncd_level: float = 0.08
    ncd_sigma: float = 0.002

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if not 0 <= self.missing_rate < 0.5:
            raise ValueError("missing_rate must lie in [0, 0.5)")
        if self.n_stocks < 2 or self.n_months < 2:
            raise ValueError("need at least 2 stocks and 2 months")
        bad = [k for k in self.payoffs if k not in PLANTABLE]
        if bad:
            raise ValueError(f"payoffs can only be planted on {PLANTABLE}, got {bad}")
        object.__setattr__(self, "payoffs", {k: tuple(v) for k, v in self.payoffs.items()})
        object.__setattr__(self, "beta_range", tuple(self.beta_range))
        object.__setattr__(self, "apt_beta_range", tuple(self.apt_beta_range))

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = cls.__dataclass_fields__
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown synth options {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["payoffs"] = {k: list(v) for k, v in self.payoffs.items()}
        d["beta_range"] = list(self.beta_range)
        d["apt_beta_range"] = list(self.apt_beta_range)
        return d


@dataclass(frozen=True)
class GroundTruth:
    mode: str
    payoffs: dict  # key -> (T,) planted payoff path
    alpha: float
    theta: CharacteristicSet  # standardised characteristics the returns load on
    market: np.ndarray  # (T,) common shock
    market_betas: np.ndarray  # (N,)
    small: np.ndarray  # (T, N) bool, stocks that earned the size premium
    factors: FactorSeries | None = None  # apt mode
    apt_alphas: np.ndarray | None = None
    apt_betas: np.ndarray | None = None  # (N, 3): mkt_excess, smb, hml

    def to_json(self) -> dict:
        out = {
            "mode": self.mode,
            "alpha": self.alpha,
            "payoffs": {k: [float(x) for x in v] for k, v in self.payoffs.items()},
            "market": [float(x) for x in self.market],
            "market_betas": [float(x) for x in self.market_betas],
        }
        if self.apt_betas is not None:
            out["apt_alphas"] = [float(x) for x in self.apt_alphas]
            out["apt_betas"] = [[float(x) for x in row] for row in self.apt_betas]
            out["factors"] = {
                k: [None if not np.isfinite(x) else float(x) for x in self.factors[k]]
                for k in ("mkt", "rfr", "smb", "hml")
            }
        return out


def tickers(n: int) -> list[str]:
    width = len(str(n - 1))
    return [f"S{i:0{width}d}" for i in range(n)]


def _ar1(rng, T: int, N: int, rho: float) -> np.ndarray:
    z = np.empty((T, N))
    z[0] = rng.standard_normal(N)
    s = np.sqrt(1.0 - rho * rho)
    shocks = rng.standard_normal((T - 1, N))
    for t in range(1, T):
        z[t] = rho * z[t - 1] + s * shocks[t - 1]
    return z


def _lagged(x: np.ndarray, k: int = 1) -> np.ndarray:
    out = np.full_like(x, np.nan)
    out[k:] = x[:-k]
    return out


def planted_theta(raw: dict, start, stocks, policy: ZScorePolicy = ZScorePolicy()) -> CharacteristicSet:
    """Characteristics as the pipeline sees them: lagged, universe-restricted, z-scored."""
    panels = {}
    for key, fld in _FIELD_OF.items():
        x = raw[fld]
        if fld != "vol":
            x = _lagged(x, FUNDAMENTAL_LAG)
        panels[key] = Panel(start, stocks, x)
    mask = select_universe(panels["MV"], len(stocks))
    cs = CharacteristicSet({k: mask.restrict(p) for k, p in panels.items()})
    return standardize(cs, policy)


def generate(spec: SynthSpec) -> tuple[Dataset, GroundTruth]:
    """Draw a dataset (in ingest-output form) and its planted parameters."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    T, N = spec.n_months, spec.n_stocks
    start = MonthStamp.parse(spec.start)
    names = tickers(N)

    raw = {}
    for fld in ("btp", "mv", "dy", "ey", "vol"):
        off, scale = _LEVELS[fld]
        raw[fld] = np.exp(off + scale * _ar1(rng, T, N, spec.rho))
    ncd = np.clip(spec.ncd_level + spec.ncd_sigma * _ar1(rng, T, 1, 0.9)[:, 0], 0.005, 0.5)
    rfr = np.full(T, np.nan)
    rfr[1:] = np.log1p(ncd[:-1] / 4.0) / 3.0

    market = spec.market_mean + spec.market_sigma * rng.standard_normal(T)
    b_lo, b_hi = spec.beta_range
    market_betas = rng.uniform(b_lo, b_hi, N)
    eps = spec.noise_sigma * rng.standard_normal((T, N))

    theta = planted_theta(raw, start, names)
    t_idx = np.arange(T)
    payoffs = {}
    R = np.zeros((T, N))
    factors = apt_alphas = apt_betas = None
    if spec.mode == "apt":
        f = spec.factor_mean + spec.factor_sigma * rng.standard_normal((T, 3))
        lo, hi = spec.apt_beta_range
        apt_betas = rng.uniform(lo, hi, (N, 3))
        apt_alphas = spec.apt_alpha_sigma * rng.standard_normal(N)
        R = np.nan_to_num(rfr)[:, None] + apt_alphas[None, :] + f @ apt_betas.T + eps
        factors = FactorSeries.from_arrays(
            start, mkt=f[:, 0] + rfr, rfr=rfr, smb=f[:, 1], hml=f[:, 2]
        )
    else:
        R = spec.alpha + market[:, None] * market_betas[None, :] + eps
        if spec.mode == "cbm":
            for key, (const, amp) in spec.payoffs.items():
                path = const + amp * np.sin(2.0 * np.pi * t_idx / spec.period)
                payoffs[key] = path
                prev = _lagged(theta[key].array)
                R = R + path[:, None] * np.nan_to_num(prev)
    # formation at t-1 sees the quarter-lagged market value of t-1
    mv_form = _lagged(raw["mv"], FUNDAMENTAL_LAG + 1)
    small = np.zeros((T, N), dtype=bool)
    rows = np.flatnonzero(np.isfinite(mv_form).all(axis=1))
    if rows.size:
        med = np.median(mv_form[rows], axis=1, keepdims=True)
        small[rows] = mv_form[rows] < med
    if spec.size_premium:
        R = R + spec.size_premium * small
    R[0] = 0.0
    tri = 100.0 * np.exp(np.cumsum(R, axis=0))

    fields = {"tri": tri, **raw}
    if spec.missing_rate > 0:
        for fld in ("tri", "btp", "mv", "dy", "ey", "vol"):
            holes = rng.random((T, N)) < spec.missing_rate
            fields[fld] = np.where(holes, np.nan, fields[fld])
    ncd_panel = Panel(start, ("yield",), ncd[:, None])
    raw_ds = RawDataset(
        **{fld: Panel(start, names, fields[fld]) for fld in ("tri", "btp", "mv", "dy", "ey", "vol")},
        ncd_yield=ncd_panel,
    )
    truth = GroundTruth(
        mode=spec.mode,
        payoffs=payoffs,
        alpha=spec.alpha,
        theta=theta,
        market=market,
        market_betas=market_betas,
        small=small,
        factors=factors,
        apt_alphas=apt_alphas,
        apt_betas=apt_betas,
    )
    return build_dataset(raw_ds), truth


def write(spec: SynthSpec, directory) -> tuple[Dataset, GroundTruth]:
    """Generate and write the raw CSVs plus ``ground_truth.json`` and ``synth_spec.json``."""
    directory = Path(directory)
    dataset, truth = generate(spec)
    write_dataset(dataset.raw, directory)
    (directory / "ground_truth.json").write_text(
        json.dumps(truth.to_json(), indent=1) + "\n", encoding="utf-8"
    )
    (directory / "synth_spec.json").write_text(
        json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return dataset, truth
