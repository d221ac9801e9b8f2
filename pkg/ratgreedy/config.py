"""Configuration settings for ratgreedy runs."""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, Dict

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class LogLevel(str, Enum):
    """Supported log levels."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class Settings(BaseSettings):  # pylint: disable=too-few-public-methods
    """Process-wide settings loaded from environment variables and `.env`."""

    # Concurrency settings
    MAX_CONCURRENT_JOBS: int = Field(
        default=4,
        ge=1,
        le=64,
        description="Maximum sweep cells (or WCGA candidates) evaluated at once.",
    )

    # Experiment defaults
    DEFAULT_SEED: int = Field(
        default=0,
        ge=0,
        description="Seed used when neither the config nor the CLI sets one.",
    )
    OUTPUT_DIR: Path = Field(
        default=Path("results"),
        description="Directory for trace, approximant and plot files.",
    )

    # Logging settings
    LOG_LEVEL: LogLevel = Field(
        default=LogLevel.INFO,
        description="Logging level.",
    )
    LOG_FILE: Path = Field(
        default=Path("logs/ratgreedy.log"),
        description="Run log file path (used when LOG_TO_FILE is set).",
    )
    LOG_TO_FILE: bool = Field(
        default=False,
        description="Also write log records to LOG_FILE.",
    )

    # Development settings
    DEBUG: bool = Field(
        default=False,
        description="Enable debug mode (forces DEBUG logging).",
    )

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    @property
    def effective_log_level(self) -> str:
        """DEBUG when debug mode is on, LOG_LEVEL otherwise."""
        if self.DEBUG:
            return LogLevel.DEBUG.value
        return getattr(self.LOG_LEVEL, "value", "INFO")

    def get_log_config(self) -> Dict[str, Any]:
        """Return a logging configuration dictionary."""
        level = self.effective_log_level
        handlers: Dict[str, Any] = {
            "console": {
                "class": "logging.StreamHandler",
                "level": level,
                "formatter": "default",
                "stream": "ext://sys.stderr",
            },
        }
        if self.LOG_TO_FILE:
            self.LOG_FILE.parent.mkdir(parents=True, exist_ok=True)
            handlers["file"] = {
                "class": "logging.FileHandler",
                "filename": str(self.LOG_FILE),
                "level": level,
                "formatter": "detailed",
            }
        return {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "default": {
                    "format": "%(asctime)s %(name)s %(levelname)s %(message)s",
                },
                "detailed": {
                    "format": (
                        "%(asctime)s %(name)s %(levelname)s "
                        "%(filename)s:%(lineno)d %(message)s"
                    ),
                },
            },
            "handlers": handlers,
            "loggers": {
                "ratgreedy": {
                    "level": level,
                    "handlers": list(handlers),
                    "propagate": False,
                },
            },
        }
