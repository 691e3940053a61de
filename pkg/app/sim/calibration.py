"""
Калибровка порогов (λ, θ_L) по сетке.

Для каждой пары: ошибка I рода = PRN при H0, мощность = PRN при H1.
Допустимы пары с ошибкой I рода не выше type1_cap. Мощность оценена по
n_trials испытаниям, поэтому пары, чья мощность отстаёт от лучшей допустимой
не более чем на power_tol, считаются равными; из них берётся пара с меньшей
ошибкой I рода, затем первая по порядку сетки. По умолчанию power_tol - две
биномиальные стандартные ошибки лучшей мощности: 2·sqrt(p(1 - p) / n_trials).
"""

import logging
import math
from typing import Any, Optional, Sequence

from pydantic import BaseModel, ConfigDict

from app.core.monitor import DesignConfig, PosteriorCache, PredictiveCache
from app.errors import ConfigError, NoFeasibleCell
from app.sim.trials import Scenario, derive_design, operating_characteristics

logger = logging.getLogger("phi_monitor.calibration")


class CalibrationCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    lam: float
    theta_L: float
    type1: float
    power: float
    feasible: bool

    def as_dict(self) -> dict[str, Any]:
        return {
            "lambda": self.lam,
            "theta_L": self.theta_L,
            "type1": self.type1,
            "power": self.power,
            "feasible": self.feasible,
        }


class CalibrationGrid(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambdas: list[float]
    theta_Ls: list[float]
    h0: Scenario
    h1: Scenario
    type1_cap: float
    power_floor: float
    power_tol: float = 0.0
    cells: list[CalibrationCell]
    selected: Optional[tuple[float, float]] = None
    selected_power: Optional[float] = None
    power_floor_met: bool = False

    def cell(self, lam: float, theta_L: float) -> CalibrationCell:
        for c in self.cells:
            if c.lam == lam and c.theta_L == theta_L:
                return c
        raise KeyError((lam, theta_L))


def power_tolerance(power: float, n_trials: int) -> float:
    """Две биномиальные стандартные ошибки оценки мощности."""
    return 2.0 * math.sqrt(power * (1.0 - power) / n_trials)


def select_cell(cells: Sequence[CalibrationCell], power_tol: float = 0.0) -> CalibrationCell:
    if power_tol < 0.0:
        raise ConfigError(f"power_tol must be non-negative, got {power_tol}")
    feasible = [c for c in cells if c.feasible]
    if not feasible:
        raise NoFeasibleCell("no (lambda, theta_L) pair satisfies the type I error cap")
    top = max(c.power for c in feasible)
    tied = [c for c in feasible if c.power >= top - power_tol]
    # min() возвращает первый из равных
    return min(tied, key=lambda c: c.type1)


def calibrate(
    base_cfg: DesignConfig,
    h0: Scenario,
    h1: Scenario,
    lambdas: Sequence[float],
    theta_Ls: Sequence[float],
    n_trials: int,
    type1_cap: float,
    power_floor: float,
    seed: int,
    workers: int = 1,
    power_tol: Optional[float] = None,
) -> CalibrationGrid:
    """
    Прогон сетки (λ, θ_L) на общих потоках и выбор пары.

    power_tol=None - допуск по умолчанию из лучшей допустимой мощности
    и n_trials (см. power_tolerance).
    """
    if not lambdas or not theta_Ls:
        raise ConfigError("calibration grid needs at least one lambda and one theta_L")

    posterior = PosteriorCache(base_cfg)
    cells: list[CalibrationCell] = []

    for lam in lambdas:
        # PP зависит от λ, но не от θ_L: один кэш на строку сетки
        predictive = PredictiveCache(posterior, lam)
        for theta_L in theta_Ls:
            design = derive_design(base_cfg, lam=lam, theta_L=theta_L)
            type1 = operating_characteristics(design, h0, n_trials, seed, workers, predictive).prn
            power = operating_characteristics(design, h1, n_trials, seed, workers, predictive).prn
            cell = CalibrationCell(
                lam=lam,
                theta_L=theta_L,
                type1=type1,
                power=power,
                feasible=type1 <= type1_cap,
            )
            logger.info(
                "Calibration cell lambda=%s theta_L=%s: type1=%.4f power=%.4f",
                lam,
                theta_L,
                type1,
                power,
            )
            cells.append(cell)

    if power_tol is None:
        feasible_powers = [c.power for c in cells if c.feasible]
        power_tol = power_tolerance(max(feasible_powers), n_trials) if feasible_powers else 0.0

    grid = CalibrationGrid(
        lambdas=list(lambdas),
        theta_Ls=list(theta_Ls),
        h0=h0,
        h1=h1,
        type1_cap=type1_cap,
        power_floor=power_floor,
        power_tol=power_tol,
        cells=cells,
    )

    try:
        best = select_cell(cells, power_tol)
    except NoFeasibleCell:
        logger.warning("Calibration infeasible: no cell with type I error <= %s", type1_cap)
        raise

    logger.info("Power tolerance for selection: %.5f", power_tol)
    met = best.power >= power_floor
    if not met:
        logger.warning(
            "Selected pair (%s, %s) has power %.4f below the floor %s",
            best.lam,
            best.theta_L,
            best.power,
            power_floor,
        )
    return grid.model_copy(
        update={
            "selected": (best.lam, best.theta_L),
            "selected_power": best.power,
            "power_floor_met": met,
        }
    )
