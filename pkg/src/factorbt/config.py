"""Run configuration: a single YAML document with nested sections.

Example::

    synth: {mode: cbm, n_stocks: 250, n_months: 160}
    seed: 7
    universe: {top_n: 250}
    apt_models:
      CAPM: {factors: [mkt_excess]}
      FF3: {factors: [mkt_excess, smb, hml], window: 72}
    cbm_models:
      CBM2: {characteristics: [BTP, MV, mkt_loading]}
    backtest: {quantiles: 5}

Either ``data`` (a directory of CSVs) or ``synth`` must be given.  When
``cbm_models`` is omitted the fourteen reference specifications in
``TABLE1_MODELS`` are used.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .factors import SortSpec
from .models import APT_FACTORS, CBM_KEYS, TABLE1_MODELS, AptSpec, CbmSpec
from .preprocess import ZScorePolicy
from .synth import SynthSpec

DEFAULT_APT = {
    "CAPM": {"factors": ["mkt_excess"]},
    "FF3": {"factors": ["mkt_excess", "smb", "hml"]},
}


class ConfigError(ValueError):
    pass


@dataclass
class Diagnostic:
    level: str  # "error" | "warning"
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.message}"


@dataclass
class RunConfig:
    data: Path | None = None
    overrides: Path | None = None
    synth: dict | None = None
    seed: int | None = None
    top_n: int = 250
    sort: SortSpec = field(default_factory=SortSpec)
    policy: ZScorePolicy = field(default_factory=ZScorePolicy)
    winsorize_returns: bool = False
    mkt_loading_window: int = 36
    apt_models: dict = field(default_factory=dict)  # name -> AptSpec
    cbm_models: dict = field(default_factory=dict)  # name -> CbmSpec
    table1: bool = True
    quantiles: int = 5
    weighting: str = "equal"
    common_window: bool = True
    output: Path | None = None
    raw: dict = field(default_factory=dict)

    def synth_spec(self) -> SynthSpec:
        d = dict(self.synth or {})
        if self.seed is not None:
            d["seed"] = self.seed
        return SynthSpec.from_dict(d)

    def echo(self) -> dict:
        """Resolved settings, suitable for a manifest (no output path)."""
        out = copy.deepcopy(self.raw)
        out.pop("output", None)
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def _section(raw: dict, key: str) -> dict:
    val = raw.get(key) or {}
    if not isinstance(val, dict):
        raise ConfigError(f"section {key!r} must be a mapping")
    return val


def parse_config(raw: dict, base: Path | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from a parsed YAML mapping.

    Raises :class:`ConfigError` on structural problems; semantic checks
    live in :func:`validate`.
    """
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    base = base or Path(".")
    known = {
        "data", "overrides", "synth", "seed", "universe", "sort", "preprocess",
        "apt_models", "cbm_models", "table1", "mkt_loading_window", "backtest", "output",
    }
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys {unknown}")
    cfg = RunConfig(raw=copy.deepcopy(raw))
    if raw.get("data") is not None:
        cfg.data = (base / str(raw["data"])).resolve()
    if raw.get("overrides") is not None:
        cfg.overrides = (base / str(raw["overrides"])).resolve()
    if raw.get("synth") is not None:
        cfg.synth = dict(_section(raw, "synth"))
    if raw.get("seed") is not None:
        cfg.seed = int(raw["seed"])
    cfg.top_n = int(_section(raw, "universe").get("top_n", 250))
    sort = _section(raw, "sort")
    try:
        cfg.sort = SortSpec(
            float(sort.get("size_breakpoint", 50.0)),
            tuple(float(x) for x in sort.get("value_breakpoints", (30.0, 70.0))),
            str(sort.get("weighting", "cap")),
        )
        pre = _section(raw, "preprocess")
        cfg.policy = ZScorePolicy(float(pre.get("winsor_sigma", 3.0)), int(pre.get("min_count", 10)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg.winsorize_returns = bool(_section(raw, "preprocess").get("winsorize_returns", False))
    cfg.mkt_loading_window = int(raw.get("mkt_loading_window", 36))
    cfg.table1 = bool(raw.get("table1", True))

    apt = raw["apt_models"] if "apt_models" in raw else DEFAULT_APT
    cfg.apt_models = dict(apt or {})
    if "cbm_models" in raw:
        cfg.cbm_models = dict(raw["cbm_models"] or {})
    else:
        cfg.cbm_models = {f"CBM{n}": {"characteristics": list(k)} for n, k in TABLE1_MODELS.items()}
    bt = _section(raw, "backtest")
    cfg.quantiles = int(bt.get("quantiles", 5))
    cfg.weighting = str(bt.get("weighting", "equal"))
    cfg.common_window = bool(bt.get("common_window", True))
    if raw.get("output") is not None:
        cfg.output = (base / str(raw["output"])).resolve()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return parse_config(raw or {}, path.parent)


def build_apt_specs(cfg: RunConfig) -> dict[str, AptSpec]:
    return {
        name: AptSpec(tuple(m.get("factors", ())), int(m.get("window", 72)), bool(m.get("excess_returns", True)))
        for name, m in cfg.apt_models.items()
    }


def build_cbm_specs(cfg: RunConfig) -> dict[str, CbmSpec]:
    return {
        name: CbmSpec(tuple(m.get("characteristics", ())), int(m.get("smoothing_window", 12)))
        for name, m in cfg.cbm_models.items()
    }


def _history_length(cfg: RunConfig) -> int | None:
    if cfg.synth is not None:
        try:
            return cfg.synth_spec().n_months
        except (TypeError, ValueError):
            return None
    if cfg.data is not None and (cfg.data / "tri.csv").exists():
        with (cfg.data / "tri.csv").open(encoding="utf-8") as fh:
            return max(sum(1 for line in fh if line.strip()) - 1, 0)
    return None


def validate(cfg: RunConfig) -> list[Diagnostic]:
    """Static checks; never touches the data beyond counting rows."""
    diags: list[Diagnostic] = []
    err = lambda m: diags.append(Diagnostic("error", m))  # noqa: E731
    warn = lambda m: diags.append(Diagnostic("warning", m))  # noqa: E731

    if cfg.data is None and cfg.synth is None:
        err("either 'data' or 'synth' must be given")
    if cfg.data is not None and cfg.synth is not None:
        err("'data' and 'synth' are mutually exclusive")
    if cfg.data is not None:
        if not cfg.data.is_dir():
            err(f"data directory not found: {cfg.data}")
        else:
            for name in ("tri", "btp", "mv", "dy", "ey", "vol", "ncd"):
                if not (cfg.data / f"{name}.csv").exists():
                    err(f"missing input file {name}.csv in {cfg.data}")
    if cfg.overrides is not None and not cfg.overrides.exists():
        err(f"override file not found: {cfg.overrides}")
    if cfg.synth is not None:
        try:
            cfg.synth_spec()
        except (TypeError, ValueError) as exc:
            err(f"synth: {exc}")

    if not cfg.apt_models and not cfg.cbm_models:
        err("no models configured")
    if cfg.top_n < 2:
        err("universe.top_n must be at least 2")
    if cfg.quantiles < 2:
        err("backtest.quantiles must be at least 2")
    if cfg.weighting not in ("equal", "cap"):
        err("backtest.weighting must be 'equal' or 'cap'")

    n = _history_length(cfg)
    for name, m in cfg.apt_models.items():
        if not isinstance(m, dict):
            err(f"APT model {name}: expected a mapping")
            continue
        facs = list(m.get("factors", ()))
        if not facs:
            err(f"APT model {name}: no factors")
        for f in facs:
            if f not in APT_FACTORS:
                err(f"APT model {name}: unknown factor {f!r}")
        window = int(m.get("window", 72))
        if window < len(facs) + 1 + 8:
            err(f"APT model {name}: window {window} too short for {len(facs)} factors")
        if n is not None and window >= n:
            warn(f"APT model {name}: insufficient history ({n} months) for window {window}")
    for name, m in cfg.cbm_models.items():
        if not isinstance(m, dict):
            err(f"CBM model {name}: expected a mapping")
            continue
        keys = list(m.get("characteristics", ()))
        if not keys:
            err(f"CBM model {name}: no characteristics")
        for k in keys:
            if k not in CBM_KEYS:
                err(f"CBM model {name}: unknown characteristic {k!r}")
        if int(m.get("smoothing_window", 12)) < 1:
            err(f"CBM model {name}: smoothing_window must be >= 1")
    if n is not None and cfg.mkt_loading_window >= n:
        warn(f"mkt_loading_window {cfg.mkt_loading_window}: insufficient history ({n} months)")
    return diags
