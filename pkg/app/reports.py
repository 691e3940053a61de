"""
Отчёты: CSV (округлённое представление) и JSON (полная точность).

Каждый отчёт несёт хеш конфигурации и seed. Времени запуска в отчёте нет:
одинаковые конфигурация и seed дают побайтно одинаковый файл.
"""

import io
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Optional

import pandas as pd

logger = logging.getLogger("phi_monitor.cli")

CSV_FLOAT_FORMAT = "%.6f"


def provenance(command: str, config_hash: Optional[str], seed: Optional[int]) -> dict[str, Any]:
    return {"command": command, "config_hash": config_hash, "seed": seed}


def _fmt_header_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    return str(value)


def render_csv(
    rows: Iterable[dict[str, Any]],
    meta: dict[str, Any],
    columns: Optional[list[str]] = None,
) -> str:
    df = pd.DataFrame(list(rows), columns=columns)
    buf = io.StringIO()
    header = " ".join(f"{k}={_fmt_header_value(v)}" for k, v in meta.items())
    buf.write(f"# {header}\n")
    df.to_csv(buf, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return buf.getvalue()


def render_json(
    rows: Iterable[dict[str, Any]],
    meta: dict[str, Any],
    extra: Optional[dict[str, Any]] = None,
) -> str:
    doc: dict[str, Any] = {"provenance": meta}
    if extra:
        doc.update(extra)
    doc["rows"] = list(rows)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render(
    rows: list[dict[str, Any]],
    fmt: str,
    meta: dict[str, Any],
    extra: Optional[dict[str, Any]] = None,
    columns: Optional[list[str]] = None,
) -> str:
    if fmt == "json":
        return render_json(rows, meta, extra)
    # в CSV дополнительные поля уходят в строку-комментарий
    return render_csv(rows, {**meta, **(extra or {})}, columns)


def emit(text: str, path: Optional[str]) -> None:
    """Пишем отчёт в файл или в stdout."""
    if path is None:
        print(text, end="")
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    logger.info("Report written to %s", target)
