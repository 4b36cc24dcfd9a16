from __future__ import annotations

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

from platformdirs import user_log_dir

APP_NAME = "apf-emd"


def default_log_path() -> Path:
    return Path(user_log_dir(APP_NAME)) / "apf_emd.log"


def configure_logging(level: str = "INFO", log_path: Path | None = None) -> None:
    root = logging.getLogger()
    root.setLevel(getattr(logging, level.upper(), logging.INFO))

    fmt = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")

    handlers: list[logging.Handler] = []
    if log_path is not None:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_path,
            maxBytes=2_000_000,
            backupCount=3,
            encoding="utf-8",
        )
        file_handler.setFormatter(fmt)
        handlers.append(file_handler)

    console = logging.StreamHandler()
    console.setFormatter(fmt)
    handlers.append(console)

    for h in root.handlers:
        if isinstance(h, RotatingFileHandler):
            h.close()
    root.handlers.clear()
    for h in handlers:
        root.addHandler(h)
