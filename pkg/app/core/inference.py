"""
Апостериорная вероятность B(Y) = Pr(Φ_E - Φ_S > δ0 | α_S, α_E, x, y).

Два способа:
- асимптотический: разность индексов приближённо двумерно нормальна,
  вероятность верхнего ортанта считается одномерным интегралом;
- Монте-Карло: совместные розыгрыши p_E ~ Dir(α_E + x + y), p_S ~ Dir(α_S).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.integrate import quad
from scipy.special import ndtr
from scipy.stats import norm

from app.core.dirichlet import CountTable, DirichletParams, sample_dirichlet_array
from app.core.index_core import (
    PSD_TOL,
    CovMatrix2,
    ProbTable,
    asymptotic_cov,
    phi_arrays,
    phi_vector,
)
from app.errors import InvalidTable, NotPositiveDefinite
from app.utils.rng import STREAM_DRAWS, STREAM_MC_BLOCK, block_sizes, make_rng

logger = logging.getLogger("phi_monitor.inference")

# Размер блока розыгрышей Монте-Карло; разбиение не зависит от числа потоков
MC_BLOCK = 50_000

# Пределы интегрирования в стандартизованной шкале: φ(±38.5) ниже 1e-300
_Z_LIMIT = 38.5
# При 1 - |ρ| меньше этого считаем компоненты линейно зависимыми
_RHO_EDGE = 1e-12


class PosteriorSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha_E: DirichletParams
    alpha_S: DirichletParams
    x: CountTable
    y: CountTable
    n_max: int
    delta0: tuple[float, float] = (0.0, 0.0)

    @model_validator(mode="after")
    def _check(self) -> "PosteriorSpec":
        if self.n_max < 1:
            raise InvalidTable(f"n_max must be positive, got {self.n_max}")
        if self.x.total() + self.y.total() != self.n_max:
            raise InvalidTable(
                f"x.total() + y.total() must equal n_max={self.n_max}, "
                f"got {self.x.total()} + {self.y.total()}"
            )
        return self

    @property
    def combined(self) -> CountTable:
        return self.x + self.y


class BivariateNormal(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: tuple[float, float]
    cov: CovMatrix2


@dataclass(frozen=True)
class PosteriorDraws:
    """Розыгрыши Φ_E, Φ_S и их разности плюс параметры нормального приближения."""

    phi_E: np.ndarray
    phi_S: np.ndarray
    difference: np.ndarray
    normal_E: BivariateNormal
    normal_S: BivariateNormal
    normal_difference: BivariateNormal


# ---------------------------------------------------------------------------
# оценки подстановки
# ---------------------------------------------------------------------------


def plugin_estimate_E(spec: PosteriorSpec) -> ProbTable:
    """(α_E + x + y) / (Σα_E + N_max): апостериорное среднее на конец испытания."""
    denom = spec.alpha_E.total + spec.n_max
    cells = [
        (a + x + y) / denom
        for a, x, y in zip(spec.alpha_E.cells, spec.x.cells, spec.y.cells)
    ]
    return ProbTable.of(cells)


def plugin_estimate_S(alpha_S: DirichletParams) -> ProbTable:
    """α_S / Σα_S: априорное среднее исторического контроля."""
    total = alpha_S.total
    return ProbTable.of([a / total for a in alpha_S.cells])


def index_difference_estimate(spec: PosteriorSpec) -> tuple[float, float]:
    phi_E = phi_vector(plugin_estimate_E(spec))
    phi_S = phi_vector(plugin_estimate_S(spec.alpha_S))
    return (phi_E.phi_eff - phi_S.phi_eff, phi_E.phi_tox - phi_S.phi_tox)


def difference_cov(spec: PosteriorSpec) -> CovMatrix2:
    """Σ(p̂_E) / (N_max + Σα_E) + Σ(p̂_S) / Σα_S."""
    cov_E = asymptotic_cov(plugin_estimate_E(spec)).scale(1.0 / (spec.n_max + spec.alpha_E.total))
    cov_S = asymptotic_cov(plugin_estimate_S(spec.alpha_S)).scale(1.0 / spec.alpha_S.total)
    return cov_E.plus(cov_S)


def difference_distribution(spec: PosteriorSpec) -> BivariateNormal:
    return BivariateNormal(mean=index_difference_estimate(spec), cov=difference_cov(spec))


def credible_widths(p: ProbTable, total: float, level: float = 0.95) -> tuple[float, float]:
    """
    Ширины асимптотических маргинальных интервалов для Φ_eff и Φ_tox.

    total - эффективный объём (Σα для априорного распределения).
    """
    z = float(norm.ppf(0.5 * (1.0 + level)))
    cov = asymptotic_cov(p)
    return (
        2.0 * z * math.sqrt(cov.s11 / total),
        2.0 * z * math.sqrt(cov.s22 / total),
    )


# ---------------------------------------------------------------------------
# двумерный нормальный ортант
# ---------------------------------------------------------------------------


def _upper_tail(z: float) -> float:
    return float(ndtr(-z))


def bvn_upper_orthant(d: BivariateNormal, threshold: tuple[float, float]) -> float:
    """
    Pr(Z1 > t1, Z2 > t2) для Z ~ N(mean, cov).

    Сводится к интегралу ∫_h^∞ φ(z) Φ((ρz - k) / √(1 - ρ²)) dz
    в стандартизованной шкале (адаптивный Гаусс-Кронрод QUADPACK).
    Вырожденная ковариация сводится к одномерной задаче.
    """
    m1, m2 = d.mean
    t1, t2 = threshold
    s11, s12, s22 = d.cov.s11, d.cov.s12, d.cov.s22

    if s11 < -PSD_TOL or s22 < -PSD_TOL or d.cov.det < -PSD_TOL:
        raise NotPositiveDefinite(f"covariance {(s11, s12, s22)} is not positive semidefinite")

    sd1 = math.sqrt(max(s11, 0.0))
    sd2 = math.sqrt(max(s22, 0.0))

    if sd1 == 0.0 and sd2 == 0.0:
        logger.warning("Degenerate covariance: both variances are zero")
        return float(m1 > t1 and m2 > t2)
    if sd1 == 0.0:
        logger.warning("Degenerate covariance: first component has zero variance")
        return _upper_tail((t2 - m2) / sd2) if m1 > t1 else 0.0
    if sd2 == 0.0:
        logger.warning("Degenerate covariance: second component has zero variance")
        return _upper_tail((t1 - m1) / sd1) if m2 > t2 else 0.0

    h = (t1 - m1) / sd1
    k = (t2 - m2) / sd2
    rho = min(max(s12 / (sd1 * sd2), -1.0), 1.0)

    if rho == 0.0:
        return _upper_tail(h) * _upper_tail(k)
    if 1.0 - rho <= _RHO_EDGE:
        return _upper_tail(max(h, k))
    if 1.0 + rho <= _RHO_EDGE:
        # Z2 = -Z1: h < Z1 < -k
        return max(0.0, float(ndtr(-k) - ndtr(h)))

    lo = max(h, -_Z_LIMIT)
    hi = _Z_LIMIT
    if lo >= hi:
        return 0.0

    r = math.sqrt((1.0 - rho) * (1.0 + rho))
    inv_sqrt_2pi = 1.0 / math.sqrt(2.0 * math.pi)

    def integrand(z: float) -> float:
        return inv_sqrt_2pi * math.exp(-0.5 * z * z) * float(ndtr((rho * z - k) / r))

    # излом условного хвоста и пик плотности
    points = sorted({p for p in (0.0, k / rho) if lo < p < hi})
    value, _ = quad(
        integrand,
        lo,
        hi,
        points=points or None,
        epsabs=1e-12,
        epsrel=1e-10,
        limit=200,
    )
    return min(max(value, 0.0), 1.0)


# ---------------------------------------------------------------------------
# B(Y)
# ---------------------------------------------------------------------------


def b_asymptotic(spec: PosteriorSpec) -> float:
    return bvn_upper_orthant(difference_distribution(spec), spec.delta0)


def _mc_block(
    alpha_post_E: np.ndarray,
    alpha_S: np.ndarray,
    delta0: tuple[float, float],
    size: int,
    rng: np.random.Generator,
) -> int:
    draws_E = sample_dirichlet_array(alpha_post_E, rng, size)
    draws_S = sample_dirichlet_array(alpha_S, rng, size)
    diff = phi_arrays(draws_E) - phi_arrays(draws_S)
    return int(np.count_nonzero((diff[:, 0] > delta0[0]) & (diff[:, 1] > delta0[1])))


def montecarlo_probability(
    alpha_post_E: np.ndarray,
    alpha_S: np.ndarray,
    delta0: tuple[float, float],
    n_sims: int,
    seed: int,
    key: tuple[int, ...],
    workers: int = 1,
) -> float:
    """
    Доля пар (p_E, p_S), у которых обе компоненты Φ_E - Φ_S строго больше δ0.

    Блок i использует поток (seed, STREAM_MC_BLOCK, *key, i), поэтому
    результат зависит только от (seed, key, n_sims).
    """
    sizes = block_sizes(n_sims, MC_BLOCK)

    def run(i: int) -> int:
        rng = make_rng(seed, STREAM_MC_BLOCK, *key, i)
        return _mc_block(alpha_post_E, alpha_S, delta0, sizes[i], rng)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(run, range(len(sizes))))
    else:
        hits = sum(run(i) for i in range(len(sizes)))
    return hits / n_sims


def b_montecarlo(spec: PosteriorSpec, n_sims: int, seed: int, workers: int = 1) -> float:
    """
    B(Y) по n_sims совместным розыгрышам.

    Поток ключуется итоговой таблицей x + y: B зависит только от неё.
    """
    if n_sims < 1:
        raise ValueError(f"n_sims must be positive, got {n_sims}")
    combined = spec.combined
    alpha_post_E = spec.alpha_E.as_array() + combined.as_array()
    return montecarlo_probability(
        alpha_post_E,
        spec.alpha_S.as_array(),
        spec.delta0,
        n_sims,
        seed,
        combined.cells,
        workers=workers,
    )


def posterior_draws(spec: PosteriorSpec, n_sims: int, seed: int) -> PosteriorDraws:
    """Выборки Φ_E, Φ_S, Φ_E - Φ_S и соответствующие нормальные приближения."""
    rng = make_rng(seed, STREAM_DRAWS)
    alpha_post_E = spec.alpha_E.as_array() + spec.combined.as_array()
    phi_E = phi_arrays(sample_dirichlet_array(alpha_post_E, rng, n_sims))
    phi_S = phi_arrays(sample_dirichlet_array(spec.alpha_S, rng, n_sims))

    p_E = plugin_estimate_E(spec)
    p_S = plugin_estimate_S(spec.alpha_S)
    v_E = phi_vector(p_E)
    v_S = phi_vector(p_S)
    normal_E = BivariateNormal(
        mean=(v_E.phi_eff, v_E.phi_tox),
        cov=asymptotic_cov(p_E).scale(1.0 / (spec.n_max + spec.alpha_E.total)),
    )
    normal_S = BivariateNormal(
        mean=(v_S.phi_eff, v_S.phi_tox),
        cov=asymptotic_cov(p_S).scale(1.0 / spec.alpha_S.total),
    )
    return PosteriorDraws(
        phi_E=phi_E,
        phi_S=phi_S,
        difference=phi_E - phi_S,
        normal_E=normal_E,
        normal_S=normal_S,
        normal_difference=difference_distribution(spec),
    )
