import logging
from contextlib import asynccontextmanager
from typing import AsyncIterator

from fastapi import FastAPI

from app.db import init_db
from app.web.api import router as monitor_router

logger = logging.getLogger("phi_monitor.api")


@asynccontextmanager
async def lifespan(app: FastAPI) -> AsyncIterator[None]:
    await init_db()
    logger.info("Monitoring service started")
    yield


def create_app() -> FastAPI:
    app = FastAPI(title="Phi monitor", lifespan=lifespan)
    app.include_router(monitor_router)
    return app
