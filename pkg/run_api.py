import logging

import uvicorn

from app.settings import settings
from app.utils.logging import setup_logging
from app.web.main import create_app

logger = logging.getLogger("phi_monitor.api_main")

app = create_app()


if __name__ == "__main__":
    setup_logging()
    logger.info("Serving on %s:%s", settings.api_host, settings.api_port)
    # без reload: под systemd он не нужен
    uvicorn.run(
        app,
        host=settings.api_host,
        port=settings.api_port,
        log_level=settings.log_level.lower(),
    )
