import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError


load_dotenv()


class Settings(BaseModel):
    # БД для журнала запусков и промежуточных анализов
    database_url: str = Field(
        "sqlite+aiosqlite:///./phi_monitor.db",
        alias="DATABASE_URL",
    )

    # Уровень логирования по умолчанию
    log_level: str = Field("INFO", alias="LOG_LEVEL")

    # Сколько потоков отдаём симуляции, если в конфиге не указано
    default_workers: int = Field(1, ge=1, alias="DEFAULT_WORKERS")

    # Число розыгрышей Монте-Карло для B(Y) по умолчанию
    default_mc_sims: int = Field(10_000, ge=1, alias="DEFAULT_MC_SIMS")

    # HTTP-сервис мониторинга
    api_host: str = Field("127.0.0.1", alias="API_HOST")
    api_port: int = Field(8000, alias="API_PORT")

    @classmethod
    def load(cls) -> "Settings":
        raw = {
            "DATABASE_URL": os.getenv(
                "DATABASE_URL",
                "sqlite+aiosqlite:///./phi_monitor.db",
            ),
            "LOG_LEVEL": os.getenv("LOG_LEVEL", "INFO"),
            "DEFAULT_WORKERS": os.getenv("DEFAULT_WORKERS", "1"),
            "DEFAULT_MC_SIMS": os.getenv("DEFAULT_MC_SIMS", "10000"),
            "API_HOST": os.getenv("API_HOST", "127.0.0.1"),
            "API_PORT": os.getenv("API_PORT", "8000"),
        }

        try:
            settings = cls(**raw)
        except ValidationError as e:
            raise RuntimeError(f"Settings validation error: {e}") from e

        return settings


settings = Settings.load()
