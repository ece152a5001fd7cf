"""End-to-end run: ingest -> preprocess -> universe -> factors -> models -> backtest."""

from __future__ import annotations

import csv
import json
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import QuintileStats, run_backtest, write_quintiles
from .config import RunConfig, build_apt_specs, build_cbm_specs
from .factors import FactorSeries, build_factor_series
from .ingest import Dataset, load_dataset
from .models import (
    TABLE1_COLUMNS,
    CrossSectionFit,
    ExpectedParams,
    fit_apt,
    fit_cbm,
    predict_apt,
    predict_cbm,
    smooth_expectation,
    table1_suite,
    trailing_capm_beta,
)
from .panel import CharacteristicSet, Panel
from .preprocess import standardize, winsorize_cross_section
from .synth import generate
from .universe import UniverseMask, select_universe


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


@dataclass
class RunResult:
    dataset: Dataset
    mask: UniverseMask
    factors: FactorSeries
    characteristics: CharacteristicSet  # standardised, incl. mkt_loading
    cbm_fits: dict[str, CrossSectionFit]
    cbm_expected: dict[str, ExpectedParams]
    expected: dict[str, Panel]  # forecasts per model
    table1: list[dict]
    stats: dict[str, QuintileStats]


class _stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def load_input(cfg: RunConfig) -> Dataset:
    with _stage("ingest"):
        if cfg.synth is not None:
            dataset, _ = generate(cfg.synth_spec())
            return dataset
        return load_dataset(cfg.data, cfg.overrides)


def run_pipeline(dataset: Dataset, cfg: RunConfig) -> RunResult:
    """Run every modelling stage on an ingested dataset."""
    returns = dataset.returns
    with _stage("universe"):
        mask = select_universe(dataset.mv, cfg.top_n)
    with _stage("factors"):
        factors = build_factor_series(dataset, mask, cfg.sort)
    with _stage("preprocess"):
        est_returns = winsorize_cross_section(returns, cfg.policy) if cfg.winsorize_returns else returns
        beta = trailing_capm_beta(est_returns, factors, cfg.mkt_loading_window)
        cs = dataset.characteristics.with_panel("mkt_loading", beta)
        cs = standardize(cs.map(mask.restrict), cfg.policy)

    expected: dict[str, Panel] = {}
    cbm_fits, cbm_expected = {}, {}
    with _stage("models"):
        for name, spec in build_cbm_specs(cfg).items():
            fit = fit_cbm(est_returns, cs, spec)
            params = smooth_expectation(fit, spec.smoothing_window)
            cbm_fits[name], cbm_expected[name] = fit, params
            expected[name] = predict_cbm(params, cs)
        for name, spec in build_apt_specs(cfg).items():
            expected[name] = predict_apt(fit_apt(est_returns, factors, spec), factors)
        rows = table1_suite(est_returns, cs)[0] if cfg.table1 else []
    with _stage("backtest"):
        stats = run_backtest(
            expected,
            returns,
            mask,
            q=cfg.quantiles,
            weighting=cfg.weighting,
            mv=dataset.mv,
            common_window=cfg.common_window,
        )
    return RunResult(dataset, mask, factors, cs, cbm_fits, cbm_expected, expected, rows, stats)


def _fmt(x) -> str:
    x = float(x)
    return repr(x) if np.isfinite(x) else ""


def write_payoffs(fit: CrossSectionFit, params: ExpectedParams, path) -> None:
    """Monthly payoff estimates and their smoothed expectations, in percent."""
    keys = fit.characteristics
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["date", "ok", "n_used", "alpha_pct", *(f"{k}_pct" for k in keys),
             "exp_alpha_pct", *(f"exp_{k}_pct" for k in keys)]
        )
        for t, d in enumerate(fit.dates):
            w.writerow(
                [str(d), int(fit.ok[t]), int(fit.n_used[t]), _fmt(fit.alpha[t] * 100)]
                + [_fmt(v * 100) for v in fit.deltas[t]]
                + [_fmt(params.alpha[t] * 100)]
                + [_fmt(v * 100) for v in params.deltas[t]]
            )


def write_table1(rows: list[dict], path) -> None:
    cols = ["model", "alpha", *TABLE1_COLUMNS.values()]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([row["model"]] + [_fmt(row[c]) if c in row else "" for c in cols[1:]])


def write_bundle(result: RunResult, cfg: RunConfig, out_dir) -> Path:
    """Write all report files into ``out_dir`` atomically.

    Files are staged in a sibling temporary directory and moved into place
    only once everything has been written.
    """
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not (out_dir / "run_manifest.json").exists():
        raise FileExistsError(f"{out_dir} is not empty and holds no previous report")
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}-", dir=out_dir.parent))
    try:
        with _stage("report"):
            result.factors.to_csv(tmp / "factors.csv")
            for name, fit in result.cbm_fits.items():
                write_payoffs(fit, result.cbm_expected[name], tmp / f"payoffs_{name}.csv")
            write_table1(result.table1, tmp / "table1.csv")
            write_quintiles(result.stats, tmp)
            manifest = {
                "package": "factorbt",
                "version": __version__,
                "seed": cfg.synth_spec().seed if cfg.synth is not None else None,
                "config": cfg.echo(),
                "models": sorted(result.expected),
                "files": sorted(p.name for p in tmp.iterdir()) + ["run_manifest.json"],
            }
            (tmp / "run_manifest.json").write_text(
                json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
        if out_dir.exists():
            shutil.rmtree(out_dir)
        tmp.rename(out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out_dir


def run(cfg: RunConfig, out_dir=None) -> RunResult:
    """Load, model, backtest and write the report bundle."""
    out_dir = out_dir or cfg.output
    if out_dir is None:
        raise ValueError("no output directory given")
    dataset = load_input(cfg)
    result = run_pipeline(dataset, cfg)
    write_bundle(result, cfg, out_dir)
    return result
