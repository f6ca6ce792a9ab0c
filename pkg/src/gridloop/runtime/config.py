"""Run configuration: one YAML document with a fixed schema.

Unknown keys are rejected at every level so a misspelled setting fails loudly
instead of silently falling back to a default.  A run is reproducible from the
config plus the data files it names.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Mapping

import yaml

from gridloop.exchange.faults import FaultProfile
from gridloop.exchange.sim import ConfigError as SimConfigError
from gridloop.exchange.sim import SimConfig
from gridloop.market_data import synthetic
from gridloop.market_data.candles import IngestError, PairSeries, ingest_series
from gridloop.market_data.snapshot import ExchangeFilters, Market
from gridloop.numeric import D
from gridloop.optimizer.constraints import BoxConfig, RiskConfig
from gridloop.optimizer.detectors import DetectorConfig
from gridloop.optimizer.search import ObjectiveSpec
from gridloop.params import BotParams, ParamError, params_from_dict
from gridloop.runtime.execution import RetryPolicy
from gridloop.runtime.optimize import AcceptanceSpec

PROFILES = ("crypto", "index_futures")

GENERATORS = {
    "random_walk": synthetic.random_walk,
    "mean_reverting": synthetic.mean_reverting,
    "crash_path": synthetic.crash_path,
    "surge_path": synthetic.surge_path,
    "trend_path": synthetic.trend_path,
    "multi_regime_path": synthetic.multi_regime_path,
}


class RunConfigError(ValueError):
    pass


def _check_keys(section: str, raw: Any, allowed: set[str]) -> Mapping[str, Any]:
    if raw is None:
        return {}
    if not isinstance(raw, Mapping):
        raise RunConfigError(f"{section}: expected a mapping, got {type(raw).__name__}")
    unknown = set(raw) - allowed
    if unknown:
        raise RunConfigError(f"{section}: unknown keys {sorted(unknown)}; allowed {sorted(allowed)}")
    return raw


def _dec(v: Any) -> Decimal:
    return D(str(v))


@dataclass(frozen=True)
class PaperConfig:
    cycles: int | None = None
    breaker_threshold: int = 3  # consecutive skipped cycles before the breaker opens
    breaker_cooldown: int = 5  # cycles spent idle while open
    terminal_after: int = 4  # breaker openings in a row before giving up


@dataclass(frozen=True)
class DataSource:
    pair: str
    path: str | None = None
    format: str = "csv"
    interval_ms: int | None = None
    generator: str | None = None
    args: Mapping[str, Any] = field(default_factory=dict)
    wick: float = 0.001
    volume: float = 1_000_000.0
    funding: Decimal | None = None
    mcap_rank: int | None = None
    filters: ExchangeFilters | None = None


@dataclass(frozen=True)
class RunConfig:
    profile: str = "crypto"
    data: tuple[DataSource, ...] = ()
    start: int | None = None
    end: int | None = None
    params: BotParams = field(default_factory=BotParams)
    pair_params: Mapping[str, BotParams] = field(default_factory=dict)
    sim: SimConfig = field(default_factory=SimConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    risk: RiskConfig = field(default_factory=RiskConfig)
    box: BoxConfig = field(default_factory=BoxConfig)
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    acceptance: AcceptanceSpec = field(default_factory=AcceptanceSpec)
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    paper: PaperConfig = field(default_factory=PaperConfig)
    max_cycles: int = 6
    stop_after_passes: int = 1
    extra_free: tuple[str, ...] = ()
    output_dir: str = "out"
    base_dir: str = "."
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @property
    def stochastic(self) -> bool:
        return self.sim.faults.stochastic

    @property
    def seeds(self) -> tuple[int, ...]:
        return self.objective.seeds

    def params_for_run(self) -> BotParams | dict[str, BotParams]:
        if not self.pair_params:
            return self.params
        return {"*": self.params, **self.pair_params}

    def load_market(self) -> Market:
        return build_market(self.data, self.profile, Path(self.base_dir))


TOP_KEYS = {
    "profile", "data", "period", "params", "pair_params", "sim", "detector", "risk", "box",
    "objective", "acceptance", "retry", "paper", "max_cycles", "stop_after_passes", "extra_free",
    "output_dir",
}


def _data(raw: Any) -> tuple[DataSource, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise RunConfigError("data: expected a list of sources")
    out = []
    allowed = {"pair", "path", "format", "interval_ms", "generator", "args", "wick", "volume",
               "funding", "mcap_rank", "filters"}
    for i, item in enumerate(raw):
        item = _check_keys(f"data[{i}]", item, allowed)
        if "pair" not in item:
            raise RunConfigError(f"data[{i}]: 'pair' is required")
        if ("path" in item) == ("generator" in item):
            raise RunConfigError(f"data[{i}]: give exactly one of 'path' or 'generator'")
        gen = item.get("generator")
        if gen is not None and gen not in GENERATORS:
            raise RunConfigError(f"data[{i}]: unknown generator {gen!r}; known {sorted(GENERATORS)}")
        if gen is not None and "interval_ms" not in item:
            raise RunConfigError(f"data[{i}]: synthetic data needs 'interval_ms'")
        filt = None
        if "filters" in item:
            f = _check_keys(f"data[{i}].filters", item["filters"], {"tick_size", "lot_size", "min_notional"})
            filt = ExchangeFilters(**{k: _dec(v) for k, v in f.items()})
        out.append(DataSource(
            pair=str(item["pair"]),
            path=item.get("path"),
            format=item.get("format", "csv"),
            interval_ms=None if item.get("interval_ms") is None else int(item["interval_ms"]),
            generator=gen,
            args=dict(item.get("args") or {}),
            wick=float(item.get("wick", 0.001)),
            volume=float(item.get("volume", 1_000_000.0)),
            funding=None if item.get("funding") is None else _dec(item["funding"]),
            mcap_rank=item.get("mcap_rank"),
            filters=filt,
        ))
    pairs = [d.pair for d in out]
    if len(set(pairs)) != len(pairs):
        raise RunConfigError("data: duplicate pair ids")
    return tuple(out)


def _sim(raw: Any) -> SimConfig:
    raw = _check_keys("sim", raw, {f.name for f in dataclasses.fields(SimConfig)})
    kw: dict[str, Any] = {}
    for k, v in raw.items():
        if k == "faults":
            f = _check_keys("sim.faults", v, {f.name for f in dataclasses.fields(FaultProfile)})
            fk = dict(f)
            if "disconnect_intervals" in fk:
                fk["disconnect_intervals"] = tuple((int(a), int(b)) for a, b in fk["disconnect_intervals"])
            kw["faults"] = FaultProfile(**fk)
        elif k == "funding_interval_hours":
            kw[k] = int(v)
        else:
            kw[k] = _dec(v)
    return SimConfig(**kw)


def _simple(section: str, cls: type, raw: Any, conv: Mapping[str, Any]) -> Any:
    raw = _check_keys(section, raw, {f.name for f in dataclasses.fields(cls)})
    return cls(**{k: conv.get(k, lambda x: x)(v) for k, v in raw.items()})


def _pair(v: Any) -> tuple[Decimal, Decimal]:
    lo, hi = v
    return _dec(lo), _dec(hi)


def parse_config(raw: Mapping[str, Any], base_dir: Path | str = ".") -> RunConfig:
    """Validate a decoded config document; raises RunConfigError on any problem."""
    raw = _check_keys("config", raw, TOP_KEYS)
    try:
        profile = raw.get("profile", "crypto")
        if profile not in PROFILES:
            raise RunConfigError(f"profile: {profile!r} not in {PROFILES}")
        period = _check_keys("period", raw.get("period"), {"start", "end"})
        params = params_from_dict(raw.get("params") or {})
        pair_raw = raw.get("pair_params") or {}
        if not isinstance(pair_raw, Mapping):
            raise RunConfigError("pair_params: expected a mapping of pair -> overrides")
        pair_params = {str(p): params_from_dict(v or {}, base=params) for p, v in sorted(pair_raw.items())}

        obj_raw = dict(_check_keys("objective", raw.get("objective"),
                                   {"terms", "seeds", "budget", "refine_rounds", "search_seed"}))
        if "terms" in obj_raw:
            obj_raw["terms"] = tuple((str(m), _dec(w)) for m, w in obj_raw["terms"])
        if "seeds" in obj_raw:
            obj_raw["seeds"] = tuple(int(s) for s in obj_raw["seeds"])
        objective = ObjectiveSpec(**obj_raw)

        cfg = RunConfig(
            profile=profile,
            data=_data(raw.get("data")),
            start=None if period.get("start") is None else int(period["start"]),
            end=None if period.get("end") is None else int(period["end"]),
            params=params,
            pair_params=pair_params,
            sim=_sim(raw.get("sim")),
            detector=_simple("detector", DetectorConfig, raw.get("detector"),
                             {"dd_trigger": _dec, "capture_ratio": _dec}),
            risk=_simple("risk", RiskConfig, raw.get("risk"),
                         {"global_capital": _dec, "safety_factor": _dec, "q_max": _dec}),
            box=_simple("box", BoxConfig, raw.get("box"), {"q": _pair, "p": _pair, "h": _pair}),
            objective=objective,
            acceptance=_simple("acceptance", AcceptanceSpec, raw.get("acceptance"), {"max_mdd": _dec}),
            retry=_simple("retry", RetryPolicy, raw.get("retry"), {}),
            paper=_simple("paper", PaperConfig, raw.get("paper"), {}),
            max_cycles=int(raw.get("max_cycles", 6)),
            stop_after_passes=int(raw.get("stop_after_passes", 1)),
            extra_free=tuple(raw.get("extra_free") or ()),
            output_dir=str(raw.get("output_dir", "out")),
            base_dir=str(base_dir),
            raw=dict(raw),
        )
    except RunConfigError:
        raise
    except (ParamError, SimConfigError, TypeError, ValueError, ArithmeticError) as exc:
        raise RunConfigError(str(exc)) from exc
    if cfg.max_cycles < 1 or cfg.stop_after_passes < 1:
        raise RunConfigError("max_cycles and stop_after_passes must be >= 1")
    return cfg


def load_config(path: Path | str, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except OSError as exc:
        raise RunConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise RunConfigError(f"{path}: invalid YAML: {exc}") from exc
    for dotted, value in (overrides or {}).items():
        _set_dotted(raw, dotted, value)
    return parse_config(raw, path.parent)


def _set_dotted(doc: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise RunConfigError(f"override {dotted}: {k} is not a mapping")
    node[keys[-1]] = value


def _load_series(src: DataSource, base: Path) -> PairSeries:
    if src.path is not None:
        p = Path(src.path)
        if not p.is_absolute():
            p = base / p
        try:
            return ingest_series(p, src.format, src.pair, src.interval_ms)
        except OSError as exc:
            raise RunConfigError(f"data for {src.pair}: cannot read {p}: {exc}") from exc
    gen = GENERATORS[src.generator]
    try:
        closes = gen(**src.args)
    except TypeError as exc:
        raise RunConfigError(f"data for {src.pair}: bad generator args: {exc}") from exc
    tick = src.filters.tick_size if src.filters is not None else ExchangeFilters().tick_size
    return synthetic.series_from_closes(src.pair, closes, src.interval_ms, wick=src.wick,
                                        volume=src.volume, tick=tick)


def build_market(sources: tuple[DataSource, ...], profile: str, base: Path) -> Market:
    series, funding, ranks, filters = {}, {}, {}, {}
    for src in sources:
        try:
            series[src.pair] = _load_series(src, base)
        except IngestError as exc:
            raise RunConfigError(f"data for {src.pair}: {exc}") from exc
        # index futures carry no perpetual funding
        if src.funding is not None and profile == "crypto":
            funding[src.pair] = src.funding
        if src.mcap_rank is not None:
            ranks[src.pair] = int(src.mcap_rank)
        if src.filters is not None:
            filters[src.pair] = src.filters
    return Market(series, funding=funding, mcap_rank=ranks, filters=filters)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(dict(cfg.raw), sort_keys=True)
