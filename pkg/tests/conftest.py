import os
import tempfile
from pathlib import Path

# БД тестов - временный файл; переменную надо выставить до импорта app
_DB_DIR = tempfile.mkdtemp(prefix="phi_monitor_test_")
os.environ["DATABASE_URL"] = f"sqlite+aiosqlite:///{_DB_DIR}/test.db"
os.environ["LOG_LEVEL"] = "WARNING"

import pytest  # noqa: E402

from app.core.dirichlet import CountTable, DirichletParams  # noqa: E402
from app.core.monitor import DesignConfig  # noqa: E402

CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def configs_dir() -> Path:
    return CONFIGS_DIR


@pytest.fixture
def example_design() -> DesignConfig:
    """Численный пример: α_S = (10, 9, 11, 30), N_max = 30, λ = 0.8."""
    return DesignConfig(
        alpha_E=DirichletParams.jeffreys(),
        alpha_S=DirichletParams.of((10, 9, 11, 30)),
        n_min=10,
        n_max=30,
        lam=0.8,
        theta_L=0.001,
    )


@pytest.fixture
def current_a() -> CountTable:
    return CountTable.of((5, 10, 0, 10))


@pytest.fixture
def current_b() -> CountTable:
    return CountTable.of((0, 10, 5, 10))


@pytest.fixture(scope="session")
def simulation_design() -> DesignConfig:
    """Дизайн симуляций: α_S = (30, 60, 30, 80), N_min = 10, N_max = 40."""
    return DesignConfig(
        alpha_S=DirichletParams.of((30, 60, 30, 80)),
        n_min=10,
        n_max=40,
        lam=0.8,
        theta_L=0.001,
    )


@pytest.fixture
def small_design() -> DesignConfig:
    """Укороченный дизайн для быстрых тестов симуляции."""
    return DesignConfig(
        alpha_S=DirichletParams.of((30, 60, 30, 80)),
        n_min=5,
        n_max=20,
        lam=0.8,
        theta_L=0.05,
    )
