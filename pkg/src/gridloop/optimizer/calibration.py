"""Deterministic per-pair starting parameters from a pair's history."""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Sequence

from gridloop.market_data.candles import PairSeries
from gridloop.market_data.indicators import InsufficientDataError, indicator_registry_lookup
from gridloop.numeric import D, ZERO
from gridloop.params import BotParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairProfile:
    pair: str
    phi_history: tuple[Decimal, ...] = ()
    liquidity: Decimal = ZERO  # 24h quote volume
    mcap_rank: int | None = None


@dataclass(frozen=True)
class CalibrationConfig:
    # (minimum 24h quote volume, allocation) from the most liquid tier down
    liquidity_tiers: tuple[tuple[Decimal, Decimal], ...] = (
        (D("100000000"), D("2000")),
        (D("10000000"), D("1000")),
        (D("0"), D("500")),
    )
    min_samples: int = 2


@dataclass
class Calibration:
    params: BotParams
    rationale: list[str] = field(default_factory=list)


def phi_history(series: PairSeries, params: BotParams, stride: int = 1) -> tuple[Decimal, ...]:
    fn = indicator_registry_lookup(params.volatility_estimator)
    out = []
    for c in series.candles[::stride]:
        try:
            out.append(fn(series, c.timestamp, params.tau_ms))
        except InsufficientDataError:
            continue
    return tuple(out)


def _quartiles(xs: Sequence[Decimal]) -> tuple[Decimal, Decimal, Decimal]:
    if len(xs) < 2:
        return xs[0], xs[0], xs[0]
    q1, q2, q3 = statistics.quantiles(sorted(xs), n=4, method="inclusive")
    return D(q1), D(q2), D(q3)


def initialize_pair_params(
    profile: PairProfile, base: BotParams | None = None, cfg: CalibrationConfig = CalibrationConfig()
) -> Calibration:
    base = base or BotParams()
    notes: list[str] = []
    allocation = cfg.liquidity_tiers[-1][1]
    for floor, amount in cfg.liquidity_tiers:
        if profile.liquidity >= floor:
            allocation = amount
            notes.append(f"allocation {amount}: 24h volume {profile.liquidity} >= tier floor {floor}")
            break

    hist = [p for p in profile.phi_history if p >= 0]
    if len(hist) < cfg.min_samples:
        notes.append(f"only {len(hist)} volatility samples (< {cfg.min_samples}); keeping default grid")
        params = base.replace(allocation=allocation, provenance="default")
        for n in notes:
            log.info("%s: %s", profile.pair, n)
        return Calibration(params, notes)

    q1, med, q3 = _quartiles(hist)
    dispersion = (q3 - q1) / med if med > 0 else ZERO
    widen = 1 + dispersion
    exponents = tuple((p * widen).quantize(D("0.0001")) for p in base.price_exponents)
    notes.append(f"volatility_req {med}: median of {len(hist)} samples")
    notes.append(f"price exponents x{widen:.4f}: interquartile dispersion {dispersion:.4f} of the median")
    params = base.replace(
        volatility_req=med, price_exponents=exponents, allocation=allocation, provenance="calibrated"
    )
    for n in notes:
        log.info("%s: %s", profile.pair, n)
    return Calibration(params, notes)
