"""
Конфигурация запуска: один JSON-файл на запуск.

Все секции проверяются pydantic-схемой с extra="forbid"; флаги CLI
перекрывают значения из файла (см. RunConfig.with_overrides).
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.core.dirichlet import CountTable
from app.core.index_core import ProbTable
from app.core.monitor import DesignConfig
from app.errors import ConfigError, PhiMonitorError
from app.settings import settings
from app.sim.trials import Scenario

logger = logging.getLogger("phi_monitor.cli")

SCHEMA_VERSION = 1

# не влияют на результат и не входят в config_hash
_EXECUTION_ONLY: dict[str, Any] = {"workers": True, "output": {"path"}}


def _table_from_list(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return ProbTable.of(value)
    return value


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class SimulateSection(_Section):
    scenarios: list[Scenario]
    cohorts: list[int] = Field(default_factory=lambda: [1])
    n_trials: int = Field(10_000, ge=1)


class CalibrateSection(_Section):
    lambdas: list[float] = Field(..., min_length=1)
    theta_Ls: list[float] = Field(..., min_length=1)
    h0: Scenario
    h1: Scenario
    n_trials: int = Field(10_000, ge=1)
    type1_cap: float = 0.10
    power_floor: float = 0.80
    # None - две стандартные ошибки лучшей мощности
    power_tol: Optional[float] = Field(None, ge=0.0)


class ApproximationSection(_Section):
    hypotheses: list[Scenario]
    p_S: ProbTable
    alpha_S_totals: list[float]
    current_sizes: list[int]
    future_size: int = Field(20, ge=0)
    n_sims: int = Field(10_000, ge=1)

    @field_validator("p_S", mode="before")
    @classmethod
    def _p_from_list(cls, value: Any) -> Any:
        return _table_from_list(value)


class OutputSection(_Section):
    format: Literal["csv", "json"] = "csv"
    path: Optional[str] = None


class RunConfig(_Section):
    schema_version: Literal[1]
    design: DesignConfig
    current: Optional[CountTable] = None
    simulate: Optional[SimulateSection] = None
    calibrate: Optional[CalibrateSection] = None
    approximation: Optional[ApproximationSection] = None
    output: OutputSection = Field(default_factory=OutputSection)
    seed: int = Field(0, ge=0)
    workers: int = Field(default_factory=lambda: settings.default_workers, ge=1)

    @field_validator("current", mode="before")
    @classmethod
    def _counts_from_list(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            return CountTable.of(value)
        return value

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """
        Значения флагов CLI поверх файла. None означает "флаг не задан".

        Ключи method / n_sims / seed попадают и в design.
        """
        data = self.model_dump(mode="json", by_alias=True)
        if overrides.get("current") is not None:
            data["current"] = list(overrides["current"])
        for key in ("seed", "workers"):
            if overrides.get(key) is not None:
                data[key] = overrides[key]
        for key in ("method", "n_sims", "seed"):
            if overrides.get(key) is not None:
                data["design"][key] = overrides[key]
        for key in ("format", "path"):
            if overrides.get(key) is not None:
                data["output"][key] = overrides[key]
        return parse_run_config(data)

    def canonical_json(self) -> str:
        """JSON для хеша: без полей исполнения (число потоков, путь вывода)."""
        return json.dumps(
            self.model_dump(mode="json", by_alias=True, exclude=_EXECUTION_ONLY),
            sort_keys=True,
            separators=(",", ":"),
        )

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def parse_run_config(data: dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Run config validation error: {e}") from e
    except ConfigError:
        raise
    except PhiMonitorError as e:
        raise ConfigError(f"Run config is invalid: {e}") from e


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a JSON object")

    cfg = parse_run_config(data)
    logger.info("Loaded run config %s (hash %s)", path, cfg.config_hash()[:12])
    return cfg
