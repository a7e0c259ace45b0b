"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operands have incompatible or malformed shapes."""


class ConfigError(ValueError):
    """A configuration value or request is invalid."""


class ContractError(ValueError):
    """An operation was called outside its contract (e.g. non-scalar loss)."""
