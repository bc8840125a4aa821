"""
Logging setup for the command-line tool and the tool server.
"""

import logging
from typing import Optional, Union

from .settings import get_settings

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[Union[str, int]] = None) -> None:
    """Install a single stream handler on the ``meshcast`` logger.

    Args:
        level: Log level name or number; defaults to ``MESHCAST_LOG_LEVEL``
    """
    if level is None:
        level = get_settings().log_level
    if isinstance(level, str):
        level = level.upper()

    root = logging.getLogger("meshcast")
    root.setLevel(level)
    if not any(getattr(h, "_meshcast", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._meshcast = True  # type: ignore[attr-defined]
        root.addHandler(handler)
