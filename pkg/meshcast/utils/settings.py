"""
Process-wide settings read from the environment.
"""

import os
from functools import lru_cache

from pydantic import BaseModel, Field, ValidationError, field_validator

from .errors import ConfigError


class Settings(BaseModel):
    """Environment-derived knobs.

    Attributes:
        threads: upper bound on worker parallelism (``MESHCAST_THREADS``)
        log_level: default log level (``MESHCAST_LOG_LEVEL``)
    """

    threads: int = Field(default_factory=lambda: os.cpu_count() or 1)
    log_level: str = "INFO"

    @field_validator("threads")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("MESHCAST_THREADS must be a positive integer")
        return value


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Read settings once per process."""
    values = {}
    if "MESHCAST_THREADS" in os.environ:
        values["threads"] = os.environ["MESHCAST_THREADS"]
    if "MESHCAST_LOG_LEVEL" in os.environ:
        values["log_level"] = os.environ["MESHCAST_LOG_LEVEL"]
    try:
        return Settings.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"Invalid environment settings: {e}") from e


def worker_count(requested: int = 0) -> int:
    """Number of workers to use, capped by ``MESHCAST_THREADS``."""
    cap = get_settings().threads
    if requested <= 0:
        return cap
    return min(requested, cap)
