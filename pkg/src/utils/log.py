import logging
import os
from typing import Optional

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure root logging once for CLI runs.

    Precedence: explicit level, then GGPM_LOG_LEVEL from the
    environment (populated from .env by main.py), then WARNING.
    """

    chosen = (level or os.environ.get("GGPM_LOG_LEVEL") or "WARNING").upper()
    logging.basicConfig(level=getattr(logging, chosen, logging.WARNING), format=LOG_FORMAT)
    logging.getLogger().setLevel(getattr(logging, chosen, logging.WARNING))
