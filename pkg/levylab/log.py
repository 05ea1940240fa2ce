"""Logging setup."""
import logging
import os

from rich.console import Console
from rich.logging import RichHandler

_configured = False


def get_logger(name: str) -> logging.Logger:
    """Get a logger under the levylab namespace, rich-formatted on stderr."""
    global _configured
    if not _configured:
        root = logging.getLogger("levylab")
        level = os.environ.get("LEVYLAB_LOG_LEVEL", "WARNING").upper()
        root.setLevel(getattr(logging, level, logging.WARNING))
        handler = RichHandler(console=Console(stderr=True), show_path=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(handler)
        root.propagate = False
        _configured = True
    return logging.getLogger(name)
