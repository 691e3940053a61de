from __future__ import annotations

from datetime import datetime
from typing import Optional

from sqlalchemy import DateTime, Float, Index, Integer, String, Text, func
from sqlalchemy.dialects.sqlite import JSON
from sqlalchemy.ext.mutable import MutableDict
from sqlalchemy.orm import Mapped, mapped_column

from app.db import Base


class RunRecord(Base):
    """
    Журнал запусков CLI (пишется только с флагом --record).

    Тут храним:
    - подкоманду и хеш конфигурации
    - seed
    - итог запуска (PP, OC, выбранную пару порогов и т.п.)
    """

    __tablename__ = "run_records"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)

    command: Mapped[str] = mapped_column(String(32), nullable=False, index=True)
    config_hash: Mapped[Optional[str]] = mapped_column(String(64), nullable=True, index=True)
    seed: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)

    payload: Mapped[Optional[dict]] = mapped_column(
        MutableDict.as_mutable(JSON),
        nullable=True,
    )

    created_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True),
        server_default=func.now(),
        nullable=False,
    )

    def __repr__(self) -> str:  # pragma: no cover
        return f"<RunRecord id={self.id} command={self.command} hash={self.config_hash}>"


class InterimLook(Base):
    """
    Промежуточный анализ реального испытания: таблица x на момент n,
    посчитанная PP и решение.
    """

    __tablename__ = "interim_looks"
    __table_args__ = (
        Index("ix_interim_looks_trial_n", "trial_code", "n"),
    )

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)

    trial_code: Mapped[str] = mapped_column(String(64), nullable=False, index=True)
    n: Mapped[int] = mapped_column(Integer, nullable=False)

    x11: Mapped[int] = mapped_column(Integer, nullable=False)
    x12: Mapped[int] = mapped_column(Integer, nullable=False)
    x21: Mapped[int] = mapped_column(Integer, nullable=False)
    x22: Mapped[int] = mapped_column(Integer, nullable=False)

    pp: Mapped[float] = mapped_column(Float, nullable=False)
    decision: Mapped[str] = mapped_column(String(16), nullable=False)  # DecisionKind
    method: Mapped[str] = mapped_column(String(16), nullable=False)  # Method

    note: Mapped[Optional[str]] = mapped_column(Text, nullable=True)

    created_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True),
        server_default=func.now(),
        nullable=False,
    )

    def __repr__(self) -> str:  # pragma: no cover
        return f"<InterimLook trial={self.trial_code} n={self.n} pp={self.pp:.4f} decision={self.decision}>"
