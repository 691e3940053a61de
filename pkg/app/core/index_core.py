"""
Двумерный индекс Φ = (Φ_eff, Φ_tox) для таблицы 2×2 эффективность × токсичность.

Строки таблицы: эффективность да/нет, столбцы: токсичность да/нет.
Φ_eff - нормированная дивергенция Йенсена-Шеннона условного распределения
(p*_12, p*_21) от худшего случая (0, 1); Φ_tox - то же для маргинали
токсичности (p·1, p·2) от худшего случая (1, 0). Оба индекса в [0, 1],
больше - лучше.

Логарифм натуральный везде; член 0·log 0 считается равным 0.
"""

import logging
import math
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import rel_entr, xlogy

from app.errors import (
    DegenerateOffDiagonal,
    InvalidTable,
    LengthMismatch,
    NonPositiveCell,
    NotADistribution,
    NotPositiveDefinite,
)

logger = logging.getLogger("phi_monitor.index")

LOG2 = math.log(2.0)
# 1 / (2 log 2): нормировка JSD к [0, 1]
NORM = 1.0 / (2.0 * LOG2)

SUM_TOL = 1e-12
PSD_TOL = 1e-12


# ---------------------------------------------------------------------------
# типы
# ---------------------------------------------------------------------------


class ProbTable(BaseModel):
    """
    Совместные вероятности p = (p11, p12, p21, p22).

    p11 - ответ с токсичностью, p12 - ответ без токсичности,
    p21 - нет ответа, есть токсичность, p22 - ни того, ни другого.
    """

    model_config = ConfigDict(frozen=True)

    p11: float
    p12: float
    p21: float
    p22: float

    @model_validator(mode="after")
    def _check(self) -> "ProbTable":
        cells = self.cells
        if any(not math.isfinite(c) or c < 0.0 for c in cells):
            raise InvalidTable(f"probabilities must be finite and >= 0, got {cells}")
        total = math.fsum(cells)
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidTable(f"probabilities must sum to 1, got {total!r}")
        return self

    @classmethod
    def of(cls, cells: Sequence[float], normalize: bool = False) -> "ProbTable":
        """Таблица из 4 чисел; нормировка только по явному запросу."""
        values = [float(c) for c in cells]
        if len(values) != 4:
            raise InvalidTable(f"expected 4 cells, got {len(values)}")
        if normalize:
            total = math.fsum(values)
            if total <= 0.0 or not math.isfinite(total):
                raise InvalidTable(f"cannot normalize cells {values}")
            values = [v / total for v in values]
        return cls(p11=values[0], p12=values[1], p21=values[2], p22=values[3])

    @property
    def cells(self) -> tuple[float, float, float, float]:
        return (self.p11, self.p12, self.p21, self.p22)

    def as_array(self) -> np.ndarray:
        return np.array(self.cells, dtype=float)

    @property
    def p_dot1(self) -> float:
        """Маргинальная вероятность токсичности."""
        return self.p11 + self.p21

    @property
    def p_dot2(self) -> float:
        return self.p12 + self.p22

    @property
    def off_diagonal(self) -> float:
        return self.p12 + self.p21

    @property
    def strictly_positive(self) -> bool:
        return all(c > 0.0 for c in self.cells)


class IndexVector(BaseModel):
    model_config = ConfigDict(frozen=True)

    phi_eff: float
    phi_tox: float

    @model_validator(mode="after")
    def _check(self) -> "IndexVector":
        for name, value in (("phi_eff", self.phi_eff), ("phi_tox", self.phi_tox)):
            if not 0.0 <= value <= 1.0:
                raise InvalidTable(f"{name} must lie in [0, 1], got {value!r}")
        return self

    def as_array(self) -> np.ndarray:
        return np.array([self.phi_eff, self.phi_tox], dtype=float)


class CovMatrix2(BaseModel):
    """Симметричная 2×2 ковариация (s21 = s12)."""

    model_config = ConfigDict(frozen=True)

    s11: float
    s12: float
    s22: float

    @model_validator(mode="after")
    def _check(self) -> "CovMatrix2":
        if self.s11 < 0.0 or self.s22 < 0.0:
            raise InvalidTable(f"variances must be >= 0, got {self.s11!r}, {self.s22!r}")
        if self.det < -PSD_TOL:
            raise NotPositiveDefinite(f"covariance is not positive semidefinite, det={self.det!r}")
        return self

    @property
    def det(self) -> float:
        return self.s11 * self.s22 - self.s12 * self.s12

    def as_array(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s12, self.s22]], dtype=float)

    def scale(self, factor: float) -> "CovMatrix2":
        return CovMatrix2(s11=self.s11 * factor, s12=self.s12 * factor, s22=self.s22 * factor)

    def plus(self, other: "CovMatrix2") -> "CovMatrix2":
        return CovMatrix2(
            s11=self.s11 + other.s11,
            s12=self.s12 + other.s12,
            s22=self.s22 + other.s22,
        )


# ---------------------------------------------------------------------------
# векторные формулы (используются и Монте-Карло веткой)
# ---------------------------------------------------------------------------


def phi_eff_from_conditional(p21_star):
    """Φ_eff как функция p*_21 (p*_12 = 1 - p*_21); работает на массивах."""
    b = np.asarray(p21_star, dtype=float)
    a = 1.0 - b
    return NORM * (a * LOG2 + xlogy(b, 2.0 * b / (b + 1.0)) + np.log(2.0 / (b + 1.0)))


def phi_tox_from_margin(p_dot1):
    """Φ_tox как функция p·1 (p·2 = 1 - p·1); работает на массивах."""
    q = np.asarray(p_dot1, dtype=float)
    return NORM * ((1.0 - q) * LOG2 + xlogy(q, 2.0 * q / (q + 1.0)) + np.log(2.0 / (q + 1.0)))


def phi_arrays(cells: np.ndarray) -> np.ndarray:
    """
    Φ для массива таблиц формы (..., 4) -> (..., 2).

    Таблицы не проверяются на сумму; нулевая внедиагональная масса - ошибка.
    """
    cells = np.asarray(cells, dtype=float)
    off = cells[..., 1] + cells[..., 2]
    if np.any(off <= 0.0):
        raise DegenerateOffDiagonal("p12 + p21 = 0 in at least one table")
    eff = phi_eff_from_conditional(cells[..., 2] / off)
    tox = phi_tox_from_margin(cells[..., 0] + cells[..., 2])
    return np.stack([eff, tox], axis=-1)


# ---------------------------------------------------------------------------
# операции
# ---------------------------------------------------------------------------


def conditional_probs(p: ProbTable) -> tuple[float, float]:
    """(p*_12, p*_21), где p*_ij = p_ij / (p_ij + p_ji)."""
    off = p.off_diagonal
    if off <= 0.0:
        raise DegenerateOffDiagonal(f"p12 + p21 = 0 for table {p.cells}")
    p12_star = p.p12 / off
    return p12_star, 1.0 - p12_star


def _as_distribution(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise NotADistribution(f"{name} must be a non-empty 1-D sequence")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        raise NotADistribution(f"{name} has negative or non-finite entries: {arr.tolist()}")
    if abs(math.fsum(arr.tolist()) - 1.0) > SUM_TOL:
        raise NotADistribution(f"{name} does not sum to 1: {arr.tolist()}")
    return arr


def jsd(p: Sequence[float], q: Sequence[float]) -> float:
    """Дивергенция Йенсена-Шеннона (натуральный логарифм), значение в [0, log 2]."""
    if len(p) != len(q):
        raise LengthMismatch(f"distributions differ in length: {len(p)} vs {len(q)}")
    pa = _as_distribution(p, "p")
    qa = _as_distribution(q, "q")
    m = 0.5 * (pa + qa)
    value = 0.5 * (float(np.sum(rel_entr(pa, m))) + float(np.sum(rel_entr(qa, m))))
    # округление не должно выводить за границы
    return min(max(value, 0.0), LOG2)


def phi_eff(p: ProbTable) -> float:
    _, p21_star = conditional_probs(p)
    return float(np.clip(phi_eff_from_conditional(p21_star), 0.0, 1.0))


def phi_tox(p: ProbTable) -> float:
    return float(np.clip(phi_tox_from_margin(p.p_dot1), 0.0, 1.0))


def phi_vector(p: ProbTable) -> IndexVector:
    return IndexVector(phi_eff=phi_eff(p), phi_tox=phi_tox(p))


def asymptotic_cov(p: ProbTable) -> CovMatrix2:
    """
    Ковариация дельта-метода для √N(Φ̂ - Φ).

    Требует строго положительных ячеек: байесовские оценки с α > 0
    это гарантируют.
    """
    if not p.strictly_positive:
        raise NonPositiveCell(f"all cells must be > 0 for the covariance, got {p.cells}")

    p12_star, p21_star = conditional_probs(p)
    q = p.p_dot1

    d_eff = NORM * math.log(p21_star / (p21_star + 1.0))
    d_tox = NORM * math.log(q / (q + 1.0))

    s11 = d_eff * d_eff * p12_star * p21_star / p.off_diagonal
    s12 = d_eff * d_tox * p12_star * p21_star
    s22 = d_tox * d_tox * q * (1.0 - q)
    return CovMatrix2(s11=s11, s12=s12, s22=s22)
