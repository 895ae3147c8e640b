"""Error types shared across the package.

Four kinds of failure are distinguished: bad configuration supplied by the
user, out-of-domain values passed to an operation, broken call contracts
between modules, and internal state corruption detected at runtime.
"""

from __future__ import annotations


class ConfigurationError(ValueError):
    """A config file, scenario, or run setting is invalid."""


class DomainError(ValueError):
    """An argument lies outside the documented domain of an operation."""


class ContractError(RuntimeError):
    """A caller violated an inter-module contract (shapes, ordering, counts)."""


class StateCorruptionError(RuntimeError):
    """Internal simulator state failed a consistency check."""
