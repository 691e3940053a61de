"""
Частотные операционные характеристики дизайна: PET, PRN, ASS.

Каждое испытание использует свой поток (seed, STREAM_TRIAL, i), поэтому
результат не зависит от числа потоков и от порядка выполнения.
Испытание всегда расходует ровно N_max розыгрышей исходов, так что разные
сценарии и пороги (λ, θ_L) с одним seed видят одни и те же потоки.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from app.core.index_core import ProbTable
from app.core.monitor import (
    DecisionKind,
    DesignConfig,
    PosteriorCache,
    PredictiveCache,
    interim_decision,
)
from app.errors import ConfigError
from app.utils.rng import STREAM_TRIAL, make_rng

logger = logging.getLogger("phi_monitor.sim")

# Сколько испытаний отдаём одному заданию пула
TRIAL_CHUNK = 250


class Scenario(BaseModel):
    """Истинные вероятности p_E, из которых генерируются участники."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    p_true: ProbTable
    label: str = ""

    @field_validator("p_true", mode="before")
    @classmethod
    def _table_from_list(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            return ProbTable.of(value)
        return value


class OperatingCharacteristics(BaseModel):
    model_config = ConfigDict(frozen=True)

    pet: float
    prn: float
    ass: float
    n_trials: int


@dataclass(frozen=True)
class TrialOutcome:
    stopped_early: bool
    claimed: bool
    sample_size: int


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    cohort: int
    oc: OperatingCharacteristics

    def as_dict(self) -> dict[str, Any]:
        p11, p12, p21, p22 = self.scenario.p_true.cells
        return {
            "scenario": self.scenario.label,
            "p11": p11,
            "p12": p12,
            "p21": p21,
            "p22": p22,
            "cohort": self.cohort,
            "PET": self.oc.pet,
            "PRN": self.oc.prn,
            "ASS": self.oc.ass,
            "n_trials": self.oc.n_trials,
        }


def derive_design(cfg: DesignConfig, **changes: Any) -> DesignConfig:
    """Копия дизайна с изменёнными полями и повторной проверкой инвариантов."""
    return DesignConfig.model_validate({**cfg.model_dump(), **changes})


def predictive_for(cfg: DesignConfig, posterior: Optional[PosteriorCache] = None) -> PredictiveCache:
    if posterior is None or posterior.key != cfg.posterior_key():
        posterior = PosteriorCache(cfg)
    return PredictiveCache(posterior, cfg.lam)


def simulate_trial(
    cfg: DesignConfig,
    sc: Scenario,
    stream: np.random.Generator,
    predictive: Optional[PredictiveCache] = None,
) -> TrialOutcome:
    """
    Одно испытание: исходы участников по одному из multinomial(p_true),
    промежуточные анализы на n_min, n_min + cohort, ... < N_max,
    финальный анализ на N_max.
    """
    if predictive is None:
        predictive = predictive_for(cfg)

    draws = stream.choice(4, size=cfg.n_max, p=sc.p_true.as_array())
    counts = np.cumsum(np.eye(4, dtype=np.int64)[draws], axis=0)

    for n in cfg.look_schedule():
        decision = interim_decision(cfg, predictive.pp(counts[n - 1]))
        if decision.kind is DecisionKind.STOP_FUTILITY:
            logger.debug("Futility stop at n=%s (PP=%.6f)", n, decision.pp)
            return TrialOutcome(stopped_early=True, claimed=False, sample_size=n)
        if decision.kind is DecisionKind.STOP_SUCCESS:
            logger.debug("Success stop at n=%s (PP=%.6f)", n, decision.pp)
            return TrialOutcome(stopped_early=True, claimed=True, sample_size=n)

    b = float(predictive.posterior.lookup(counts[-1][None, :])[0])
    return TrialOutcome(stopped_early=False, claimed=b >= cfg.lam, sample_size=cfg.n_max)


def _run_chunk(
    cfg: DesignConfig,
    sc: Scenario,
    seed: int,
    indices: range,
    predictive: PredictiveCache,
) -> list[TrialOutcome]:
    return [
        simulate_trial(cfg, sc, make_rng(seed, STREAM_TRIAL, i), predictive)
        for i in indices
    ]


def operating_characteristics(
    cfg: DesignConfig,
    sc: Scenario,
    n_trials: int,
    seed: int,
    workers: int = 1,
    predictive: Optional[PredictiveCache] = None,
) -> OperatingCharacteristics:
    if n_trials < 1:
        raise ConfigError(f"n_trials must be positive, got {n_trials}")
    if predictive is None or predictive.lam != cfg.lam or predictive.posterior.key != cfg.posterior_key():
        predictive = predictive_for(cfg)

    chunks = [
        range(start, min(start + TRIAL_CHUNK, n_trials))
        for start in range(0, n_trials, TRIAL_CHUNK)
    ]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda idx: _run_chunk(cfg, sc, seed, idx, predictive), chunks))
    else:
        parts = [_run_chunk(cfg, sc, seed, idx, predictive) for idx in chunks]

    outcomes = [o for part in parts for o in part]
    stopped = sum(o.stopped_early for o in outcomes)
    claimed = sum(o.claimed for o in outcomes)
    total_size = sum(o.sample_size for o in outcomes)

    oc = OperatingCharacteristics(
        pet=stopped / n_trials,
        prn=claimed / n_trials,
        ass=total_size / n_trials,
        n_trials=n_trials,
    )
    logger.info(
        "Scenario %r cohort=%s lambda=%s theta_L=%s: PET=%.4f PRN=%.4f ASS=%.4f",
        sc.label,
        cfg.cohort,
        cfg.lam,
        cfg.theta_L,
        oc.pet,
        oc.prn,
        oc.ass,
    )
    return oc


def run_scenarios(
    cfg: DesignConfig,
    scenarios: Sequence[Scenario],
    cohorts: Sequence[int],
    n_trials: int,
    seed: int,
    workers: int = 1,
) -> list[ScenarioResult]:
    """Пакет сценариев: строка на каждую пару (сценарий, размер когорты)."""
    predictive = predictive_for(cfg)
    results: list[ScenarioResult] = []
    for sc in scenarios:
        for cohort in cohorts:
            design = derive_design(cfg, cohort=cohort)
            oc = operating_characteristics(design, sc, n_trials, seed, workers, predictive)
            results.append(ScenarioResult(scenario=sc, cohort=cohort, oc=oc))
    logger.info(
        "Scenario batch done: %s rows, %s posterior values computed",
        len(results),
        predictive.posterior.computed,
    )
    return results
