"""
Сравнение асимптотического и Монте-Карло способов расчёта PP.

Для каждой гипотезы p_E, суммарного веса Σα_S и текущего объёма n:
α_S = Σα_S · p_S, x = n · p_E (округление методом наибольших остатков),
N_max = n + future_size.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Sequence

from app.core.dirichlet import CountTable, DirichletParams
from app.core.index_core import ProbTable
from app.core.monitor import DesignConfig, Method, predictive_probability
from app.errors import ConfigError
from app.sim.trials import Scenario, derive_design

logger = logging.getLogger("phi_monitor.sim")


@dataclass(frozen=True)
class ApproximationRow:
    hypothesis: str
    alpha_S_total: float
    n: int
    x: CountTable
    pp_asymptotic: float
    pp_montecarlo: float

    @property
    def difference(self) -> float:
        return self.pp_asymptotic - self.pp_montecarlo

    def as_dict(self) -> dict[str, Any]:
        x11, x12, x21, x22 = self.x.cells
        return {
            "hypothesis": self.hypothesis,
            "alpha_S_total": self.alpha_S_total,
            "n": self.n,
            "x11": x11,
            "x12": x12,
            "x21": x21,
            "x22": x22,
            "pp_asymptotic": self.pp_asymptotic,
            "pp_montecarlo": self.pp_montecarlo,
            "difference": self.difference,
        }


def expected_counts(p: ProbTable, n: int) -> CountTable:
    """n · p с целочисленным округлением, сохраняющим итог n."""
    if n < 0:
        raise ConfigError(f"sample size must be >= 0, got {n}")
    raw = [n * c for c in p.cells]
    counts = [math.floor(v) for v in raw]
    short = n - sum(counts)
    # недостающие единицы - ячейкам с наибольшей дробной частью, при равенстве левее
    order = sorted(range(4), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return CountTable.of(counts)


def approximation_study(
    base_cfg: DesignConfig,
    hypotheses: Sequence[Scenario],
    p_S: ProbTable,
    alpha_S_totals: Sequence[float],
    current_sizes: Sequence[int],
    future_size: int,
    n_sims: int,
    seed: int,
) -> list[ApproximationRow]:
    if future_size < 0:
        raise ConfigError(f"future_size must be >= 0, got {future_size}")

    rows: list[ApproximationRow] = []
    for hyp in hypotheses:
        for total in alpha_S_totals:
            alpha_S = DirichletParams.of([total * c for c in p_S.cells])
            for n in current_sizes:
                if n < 1:
                    raise ConfigError(f"current sizes must be positive, got {n}")
                x = expected_counts(hyp.p_true, n)
                design = derive_design(
                    base_cfg,
                    alpha_S=alpha_S,
                    n_min=n,
                    n_max=n + future_size,
                    method=Method.ASYMPTOTIC,
                )
                pp_asym = predictive_probability(design, x).pp
                mc_design = derive_design(design, method=Method.MONTECARLO, n_sims=n_sims, seed=seed)
                pp_mc = predictive_probability(mc_design, x).pp

                row = ApproximationRow(
                    hypothesis=hyp.label,
                    alpha_S_total=float(total),
                    n=n,
                    x=x,
                    pp_asymptotic=pp_asym,
                    pp_montecarlo=pp_mc,
                )
                logger.info(
                    "Approximation %r sum(alpha_S)=%s n=%s: asymptotic=%.4f montecarlo=%.4f",
                    hyp.label,
                    total,
                    n,
                    pp_asym,
                    pp_mc,
                )
                rows.append(row)
    return rows
