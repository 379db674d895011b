"""Logging setup: stdlib handlers from logging.json, structlog on top."""

import json
import logging
import logging.config
from pathlib import Path
from typing import Optional

import structlog

DEFAULT_CONFIG = Path(__file__).with_name("logging.json")


def configure_logging(level: str = "WARNING", config_path: Optional[str] = None) -> None:
    """Apply the dictConfig file and route structlog through stdlib logging"""
    path = Path(config_path) if config_path else DEFAULT_CONFIG
    with open(path, "r", encoding="utf-8") as f:
        config = json.load(f)

    level = level.upper()
    config["loggers"][""]["level"] = level
    if "subspace_mapper" in config["loggers"]:
        config["loggers"]["subspace_mapper"]["level"] = level
    logging.config.dictConfig(config)

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.KeyValueRenderer(key_order=["event"], sort_keys=True),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
