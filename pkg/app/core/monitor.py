"""
Предсказательная вероятность PP и правила остановки.

PP = Σ_y f_m(y | α_E, x) · I(B(x + y) >= λ) по всем таблицам y с итогом
m = N_max - n. B зависит только от итоговой таблицы x + y, поэтому
значения B запоминаются в общем кэше (PosteriorCache), а PP при заданном
λ - в PredictiveCache.
"""

import enum
import logging
import threading
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.dirichlet import (
    CountTable,
    DirichletParams,
    dcm_log_pmf_array,
    outcome_array,
)
from app.core.inference import PosteriorSpec, b_asymptotic, b_montecarlo
from app.errors import (
    ConfigError,
    PredictiveWeightsError,
    TrialComplete,
    WrongSampleSize,
)
from app.settings import settings

logger = logging.getLogger("phi_monitor.monitor")

WEIGHT_TOL = 1e-10


class Method(str, enum.Enum):
    ASYMPTOTIC = "asymptotic"
    MONTECARLO = "montecarlo"


class DecisionKind(str, enum.Enum):
    STOP_FUTILITY = "stop_futility"
    STOP_SUCCESS = "stop_success"
    CONTINUE = "continue"


class ClaimKind(str, enum.Enum):
    CLAIM_EFFECTIVE = "claim_effective"
    CLAIM_NOT_EFFECTIVE = "claim_not_effective"


def _dirichlet_from_any(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return DirichletParams.of(value)
    return value


class DesignConfig(BaseModel):
    """
    Полный дизайн испытания.

    В JSON порог λ пишется как "lambda"; α можно задавать списком из 4 чисел.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    alpha_E: DirichletParams = Field(default_factory=DirichletParams.jeffreys)
    alpha_S: DirichletParams
    n_min: int
    n_max: int
    cohort: int = 1
    lam: float = Field(..., alias="lambda")
    theta_L: float
    theta_U: float = 1.0
    delta0: tuple[float, float] = (0.0, 0.0)
    method: Method = Method.ASYMPTOTIC
    n_sims: int = Field(default_factory=lambda: settings.default_mc_sims)
    seed: int = 0

    @field_validator("alpha_E", "alpha_S", mode="before")
    @classmethod
    def _alpha_from_list(cls, value: Any) -> Any:
        return _dirichlet_from_any(value)

    @model_validator(mode="after")
    def _check(self) -> "DesignConfig":
        if not 0.0 < self.lam < 1.0:
            raise ConfigError(f"lambda must lie in (0, 1), got {self.lam}")
        if not 0.0 < self.theta_L < self.theta_U <= 1.0:
            raise ConfigError(
                f"thresholds must satisfy 0 < theta_L < theta_U <= 1, "
                f"got theta_L={self.theta_L}, theta_U={self.theta_U}"
            )
        if not 1 <= self.n_min <= self.n_max:
            raise ConfigError(f"need 1 <= n_min <= n_max, got n_min={self.n_min}, n_max={self.n_max}")
        if self.cohort < 1:
            raise ConfigError(f"cohort must be positive, got {self.cohort}")
        if self.n_sims < 1:
            raise ConfigError(f"n_sims must be positive, got {self.n_sims}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        return self

    def posterior_key(self) -> tuple:
        """Поля, от которых зависит B; дизайны с равным ключом делят кэш."""
        key: tuple = (
            self.alpha_E.cells,
            self.alpha_S.cells,
            self.n_max,
            self.delta0,
            self.method.value,
        )
        if self.method is Method.MONTECARLO:
            key += (self.n_sims, self.seed)
        return key

    def look_schedule(self) -> list[int]:
        """Промежуточные анализы: n_min, n_min + cohort, ... строго меньше n_max."""
        return list(range(self.n_min, self.n_max, self.cohort))


class Decision(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: DecisionKind
    pp: float

    @property
    def stops(self) -> bool:
        return self.kind is not DecisionKind.CONTINUE


class FinalAnalysis(BaseModel):
    model_config = ConfigDict(frozen=True)

    claim: ClaimKind
    b: float


@dataclass(frozen=True)
class DetailRow:
    """Строка таблицы расчёта PP: исход y, f_m(y), B(Y), индикатор."""

    y: CountTable
    f_m: float
    b: float
    indicator: int

    def as_dict(self) -> dict[str, Any]:
        y11, y12, y21, y22 = self.y.cells
        return {
            "y11": y11,
            "y12": y12,
            "y21": y21,
            "y22": y22,
            "f_m": self.f_m,
            "B": self.b,
            "indicator": self.indicator,
        }


@dataclass(frozen=True)
class PredictiveResult:
    pp: float
    rows: list[DetailRow]


# ---------------------------------------------------------------------------
# кэши
# ---------------------------------------------------------------------------


class PosteriorCache:
    """
    B по итоговым таблицам z (итог N_max) для одного дизайна.

    Значения лежат в плотном массиве по (z11, z12, z21); z22 определяется
    итогом. Кэш общий для всех λ и θ_L и безопасен для нескольких потоков.
    """

    def __init__(self, cfg: DesignConfig) -> None:
        self.cfg = cfg
        self.key = cfg.posterior_key()
        n = cfg.n_max
        self._values = np.full((n + 1, n + 1, n + 1), np.nan)
        self._lock = threading.Lock()
        self.computed = 0

    def _compute(self, z: tuple[int, int, int, int]) -> float:
        cfg = self.cfg
        spec = PosteriorSpec(
            alpha_E=cfg.alpha_E,
            alpha_S=cfg.alpha_S,
            x=CountTable.of(z),
            y=CountTable.zeros(),
            n_max=cfg.n_max,
            delta0=cfg.delta0,
        )
        if cfg.method is Method.MONTECARLO:
            return b_montecarlo(spec, cfg.n_sims, cfg.seed)
        return b_asymptotic(spec)

    def lookup(self, tables: np.ndarray) -> np.ndarray:
        """B для массива итоговых таблиц формы (K, 4)."""
        tables = np.asarray(tables, dtype=np.int64)
        index = (tables[:, 0], tables[:, 1], tables[:, 2])
        values = self._values[index]
        missing = np.isnan(values)
        if missing.any():
            # считаем вне блокировки; гонка даёт лишь повторный расчёт того же значения
            fresh = [
                (z, self._compute(z))
                for z in (tuple(int(v) for v in row) for row in np.unique(tables[missing], axis=0))
            ]
            with self._lock:
                for z, b in fresh:
                    if np.isnan(self._values[z[:3]]):
                        self._values[z[:3]] = b
                        self.computed += 1
            values = self._values[index]
        return values

    def get(self, z: CountTable) -> float:
        if z.total() != self.cfg.n_max:
            raise WrongSampleSize(f"final table total {z.total()} != n_max {self.cfg.n_max}")
        return float(self.lookup(z.as_array()[None, :])[0])

    def fill(self) -> None:
        """Посчитать B для всех C(N_max + 3, 3) итоговых таблиц."""
        self.lookup(outcome_array(self.cfg.n_max))
        logger.info("Posterior cache filled: %s tables", self.computed)


def _predictive_terms(
    cfg: DesignConfig,
    x: np.ndarray,
    cache: PosteriorCache,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(исходы y, веса f_m(y), B(x + y)) для текущих данных x."""
    n = int(x.sum())
    # n = n_max допустимо: единственный исход y = 0, PP = I(B(x) >= λ)
    if n > cfg.n_max:
        raise TrialComplete(f"n={n} participants observed, n_max={cfg.n_max}")
    outcomes = outcome_array(cfg.n_max - n)
    weights = np.exp(dcm_log_pmf_array(outcomes, cfg.alpha_E.as_array() + x))
    total = float(weights.sum())
    if abs(total - 1.0) > WEIGHT_TOL:
        raise PredictiveWeightsError(f"predictive weights sum to {total!r}")
    b_values = cache.lookup(outcomes + x)
    return outcomes, weights, b_values


class PredictiveCache:
    """PP по промежуточным таблицам x для фиксированного λ."""

    def __init__(self, posterior: PosteriorCache, lam: float) -> None:
        self.posterior = posterior
        self.lam = lam
        self._values: dict[tuple[int, ...], float] = {}
        self._lock = threading.Lock()

    def pp(self, x: np.ndarray) -> float:
        key = tuple(int(v) for v in x)
        value = self._values.get(key)
        if value is None:
            _, weights, b_values = _predictive_terms(self.posterior.cfg, np.asarray(key), self.posterior)
            value = min(float(weights[b_values >= self.lam].sum()), 1.0)
            with self._lock:
                self._values[key] = value
        return value


# ---------------------------------------------------------------------------
# операции
# ---------------------------------------------------------------------------


def predictive_probability(
    cfg: DesignConfig,
    x: CountTable,
    cache: Optional[PosteriorCache] = None,
) -> PredictiveResult:
    """PP и построчная детализация (y, f_m(y), B(Y), индикатор B >= λ)."""
    if cache is None:
        cache = PosteriorCache(cfg)
    outcomes, weights, b_values = _predictive_terms(cfg, x.as_array(), cache)
    indicators = (b_values >= cfg.lam).astype(int)
    pp = min(float(weights[indicators == 1].sum()), 1.0)

    rows = [
        DetailRow(y=CountTable.of(y.tolist()), f_m=float(w), b=float(b), indicator=int(i))
        for y, w, b, i in zip(outcomes, weights, b_values, indicators)
    ]
    logger.debug("PP for x=%s: %.6f over %s outcomes", x.cells, pp, len(rows))
    return PredictiveResult(pp=pp, rows=rows)


def interim_decision(cfg: DesignConfig, pp: float) -> Decision:
    if not 0.0 <= pp <= 1.0:
        raise ValueError(f"pp must lie in [0, 1], got {pp}")
    if pp < cfg.theta_L:
        kind = DecisionKind.STOP_FUTILITY
    elif pp > cfg.theta_U:
        kind = DecisionKind.STOP_SUCCESS
    else:
        kind = DecisionKind.CONTINUE
    return Decision(kind=kind, pp=pp)


def final_analysis(
    cfg: DesignConfig,
    x_full: CountTable,
    cache: Optional[PosteriorCache] = None,
) -> FinalAnalysis:
    """Заявление об эффективности на N_max: B(x_full) >= λ."""
    if x_full.total() != cfg.n_max:
        raise WrongSampleSize(f"final analysis needs {cfg.n_max} participants, got {x_full.total()}")
    if cache is None:
        cache = PosteriorCache(cfg)
    b = cache.get(x_full)
    claim = ClaimKind.CLAIM_EFFECTIVE if b >= cfg.lam else ClaimKind.CLAIM_NOT_EFFECTIVE
    return FinalAnalysis(claim=claim, b=b)
