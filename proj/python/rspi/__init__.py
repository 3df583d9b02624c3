"""Risk-sensitive path integral control."""

from ._rspi import *  # noqa: F401,F403
from ._rspi import ConfigError, DegenerateEstimate, IllPosedError

__all__ = [name for name in dir() if not name.startswith("_")]
