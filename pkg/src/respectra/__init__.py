"""Crystal-field, mean-field and exchange-pair model of rare-earth optical lines."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AmbiguousIrrepError, ConfigError, ContractError, RespectraError, UnmodeledPhaseError,
)

__all__ = [
    "__version__",
    "AmbiguousIrrepError",
    "ConfigError",
    "ContractError",
    "RespectraError",
    "UnmodeledPhaseError",
]
