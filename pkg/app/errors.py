"""
Исключения предметной области.

Все ошибки библиотеки наследуются от PhiMonitorError, чтобы CLI и
HTTP-сервис могли ловить их одним блоком и переводить в код выхода / ответ.
"""


class PhiMonitorError(Exception):
    """Базовая ошибка библиотеки."""

    # имя причины в ответах HTTP-сервиса
    reason: str = "phi_monitor_error"


class InvalidTable(PhiMonitorError):
    """Нарушены инварианты ProbTable / CountTable / DirichletParams."""

    reason = "invalid_table"


class DegenerateOffDiagonal(PhiMonitorError, ValueError):
    """p12 + p21 = 0: условные вероятности p*_12, p*_21 не определены."""

    reason = "degenerate_off_diagonal"


class LengthMismatch(PhiMonitorError, ValueError):
    reason = "length_mismatch"


class NotADistribution(PhiMonitorError, ValueError):
    reason = "not_a_distribution"


class NonPositiveCell(PhiMonitorError, ValueError):
    """Асимптотическая ковариация требует строго положительных ячеек."""

    reason = "non_positive_cell"


class NotPositiveDefinite(PhiMonitorError):
    reason = "not_positive_definite"


class PredictiveWeightsError(PhiMonitorError, ArithmeticError):
    """Веса f_m(y) в сумме не дают 1 (допуск 1e-10)."""

    reason = "predictive_weights"


class TrialComplete(PhiMonitorError):
    """Промежуточный анализ невозможен: набрано больше N_max участников."""

    reason = "trial_complete"


class WrongSampleSize(PhiMonitorError):
    """Финальный анализ вызван на таблице с итогом, отличным от N_max."""

    reason = "wrong_sample_size"


class NoFeasibleCell(PhiMonitorError):
    """Ни одна пара (λ, θ_L) не укладывается в ограничение на ошибку I рода."""

    reason = "no_feasible_cell"


class ConfigError(PhiMonitorError):
    reason = "config_error"
