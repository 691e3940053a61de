"""
Запись в журнал запусков и журнал промежуточных анализов.
"""

import logging
from typing import Any, Optional

from sqlalchemy import select
from sqlalchemy.exc import SQLAlchemyError

from app.core.dirichlet import CountTable
from app.core.monitor import Decision, Method
from app.db import SessionLocal
from app.models import InterimLook, RunRecord

logger = logging.getLogger("phi_monitor.storage")


async def record_run(
    command: str,
    config_hash: Optional[str],
    seed: Optional[int],
    payload: Optional[dict[str, Any]] = None,
) -> Optional[int]:
    """Возвращает id записи или None, если БД недоступна."""
    async with SessionLocal() as session:
        record = RunRecord(
            command=command,
            config_hash=config_hash,
            seed=seed,
            payload=payload,
        )
        session.add(record)
        try:
            await session.commit()
        except SQLAlchemyError as e:  # noqa: BLE001
            logger.exception("record_run DB error: %s", e)
            return None
        await session.refresh(record)

    logger.info("Run recorded: id=%s command=%s", record.id, command)
    return record.id


async def record_look(
    trial_code: str,
    x: CountTable,
    decision: Decision,
    method: Method,
    note: Optional[str] = None,
) -> InterimLook:
    x11, x12, x21, x22 = x.cells
    async with SessionLocal() as session:
        look = InterimLook(
            trial_code=trial_code,
            n=x.total(),
            x11=x11,
            x12=x12,
            x21=x21,
            x22=x22,
            pp=decision.pp,
            decision=decision.kind.value,
            method=method.value,
            note=note,
        )
        session.add(look)
        try:
            await session.commit()
        except SQLAlchemyError as e:  # noqa: BLE001
            logger.exception("record_look DB error trial=%s: %s", trial_code, e)
            raise
        await session.refresh(look)

    logger.info(
        "Interim look recorded: trial=%s n=%s pp=%.4f decision=%s",
        trial_code,
        look.n,
        look.pp,
        look.decision,
    )
    return look


async def list_looks(trial_code: str) -> list[InterimLook]:
    async with SessionLocal() as session:
        res = await session.execute(
            select(InterimLook)
            .where(InterimLook.trial_code == trial_code)
            .order_by(InterimLook.n, InterimLook.id)
        )
        return list(res.scalars().all())
