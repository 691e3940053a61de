"""
Сопряжённая модель Дирихле-мультиномиальная для таблицы 2×2.

- апостериорные параметры α + x;
- розыгрыш p ~ Dir(α) через четыре гамма-величины;
- предсказательное распределение будущих исходов (DCM) в лог-гамма форме;
- перебор всех таблиц с итогом m.
"""

import logging
import math
from functools import lru_cache
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import gammaln

from app.core.index_core import ProbTable
from app.errors import InvalidTable

logger = logging.getLogger("phi_monitor.dirichlet")


class DirichletParams(BaseModel):
    """Гиперпараметры α (псевдо-наблюдения) одной ветви."""

    model_config = ConfigDict(frozen=True)

    a11: float
    a12: float
    a21: float
    a22: float

    @model_validator(mode="after")
    def _check(self) -> "DirichletParams":
        if any(not math.isfinite(a) or a <= 0.0 for a in self.cells):
            raise InvalidTable(f"Dirichlet parameters must be finite and > 0, got {self.cells}")
        return self

    @classmethod
    def of(cls, cells: Sequence[float]) -> "DirichletParams":
        values = [float(c) for c in cells]
        if len(values) != 4:
            raise InvalidTable(f"expected 4 Dirichlet parameters, got {len(values)}")
        return cls(a11=values[0], a12=values[1], a21=values[2], a22=values[3])

    @classmethod
    def jeffreys(cls) -> "DirichletParams":
        return cls.of((0.5, 0.5, 0.5, 0.5))

    @property
    def cells(self) -> tuple[float, float, float, float]:
        return (self.a11, self.a12, self.a21, self.a22)

    @property
    def total(self) -> float:
        return math.fsum(self.cells)

    def as_array(self) -> np.ndarray:
        return np.array(self.cells, dtype=float)

    def mean(self) -> ProbTable:
        total = self.total
        return ProbTable.of([a / total for a in self.cells])


class CountTable(BaseModel):
    """Частоты (x11, x12, x21, x22): наблюдённые, будущие или суммарные."""

    model_config = ConfigDict(frozen=True)

    x11: int
    x12: int
    x21: int
    x22: int

    @model_validator(mode="after")
    def _check(self) -> "CountTable":
        if any(c < 0 for c in self.cells):
            raise InvalidTable(f"counts must be >= 0, got {self.cells}")
        return self

    @classmethod
    def of(cls, cells: Sequence[int]) -> "CountTable":
        values = list(cells)
        if len(values) != 4:
            raise InvalidTable(f"expected 4 counts, got {len(values)}")
        if any(int(v) != v for v in values):
            raise InvalidTable(f"counts must be integers, got {values}")
        return cls(x11=int(values[0]), x12=int(values[1]), x21=int(values[2]), x22=int(values[3]))

    @classmethod
    def zeros(cls) -> "CountTable":
        return cls.of((0, 0, 0, 0))

    @property
    def cells(self) -> tuple[int, int, int, int]:
        return (self.x11, self.x12, self.x21, self.x22)

    def total(self) -> int:
        return sum(self.cells)

    def as_array(self) -> np.ndarray:
        return np.array(self.cells, dtype=np.int64)

    def __add__(self, other: "CountTable") -> "CountTable":
        return CountTable.of([a + b for a, b in zip(self.cells, other.cells)])


# ---------------------------------------------------------------------------
# операции
# ---------------------------------------------------------------------------


def posterior_params(prior: DirichletParams, data: CountTable) -> DirichletParams:
    return DirichletParams.of([a + x for a, x in zip(prior.cells, data.cells)])


def sample_dirichlet_array(
    alpha: DirichletParams | np.ndarray,
    rng: np.random.Generator,
    size: int,
) -> np.ndarray:
    """
    size розыгрышей из Dir(α), массив (size, 4).

    Генератор гамма-величин numpy корректен и при форме < 1
    (ячейки априорного распределения Джеффриса равны 0.5).
    """
    a = alpha.as_array() if isinstance(alpha, DirichletParams) else np.asarray(alpha, dtype=float)
    gammas = rng.standard_gamma(a, size=(size, a.size))
    return gammas / gammas.sum(axis=1, keepdims=True)


def sample_dirichlet(alpha: DirichletParams, rng: np.random.Generator) -> ProbTable:
    draw = sample_dirichlet_array(alpha, rng, 1)[0]
    # сумма после деления может отличаться от 1 на единицы ulp
    return ProbTable.of(draw.tolist(), normalize=True)


def dcm_log_pmf_array(y: np.ndarray, alpha_post: np.ndarray) -> np.ndarray:
    """
    log f_m(y | α + x) для массива исходов y формы (K, 4).

    alpha_post - уже сложенные α + x. Всё в лог-гамма пространстве.
    """
    y = np.asarray(y, dtype=float)
    a = np.asarray(alpha_post, dtype=float)
    m = y.sum(axis=-1)
    a_total = a.sum()
    return (
        gammaln(m + 1.0)
        - gammaln(y + 1.0).sum(axis=-1)
        + gammaln(a_total)
        - gammaln(a_total + m)
        + (gammaln(a + y) - gammaln(a)).sum(axis=-1)
    )


def dcm_log_pmf(y: CountTable, alpha: DirichletParams, x: CountTable) -> float:
    """log f_m(y | α, x) предсказательного распределения Дирихле-мультиномиального."""
    alpha_post = posterior_params(alpha, x).as_array()
    return float(dcm_log_pmf_array(y.as_array()[None, :], alpha_post)[0])


@lru_cache(maxsize=128)
def _outcome_grid(m: int) -> np.ndarray:
    rows = [
        (y11, y12, y21, m - y11 - y12 - y21)
        for y11 in range(m + 1)
        for y12 in range(m - y11 + 1)
        for y21 in range(m - y11 - y12 + 1)
    ]
    grid = np.array(rows, dtype=np.int64).reshape(-1, 4)
    grid.setflags(write=False)
    return grid


def outcome_array(m: int) -> np.ndarray:
    """Все таблицы с итогом m, массив (C(m+3, 3), 4) только для чтения."""
    if m < 0:
        raise InvalidTable(f"number of future participants must be >= 0, got {m}")
    return _outcome_grid(int(m))


def enumerate_outcomes(m: int) -> list[CountTable]:
    """
    Все таблицы 2×2 с итогом m.

    Порядок лексикографический по (y11, y12, y21): первая таблица
    (0, 0, 0, m), последняя (m, 0, 0, 0).
    """
    return [CountTable.of(row.tolist()) for row in outcome_array(m)]
