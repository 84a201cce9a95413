"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 1,
DataError -> 2, NumericError -> 3.
"""


class FlowNidsError(Exception):
    """Base class for all package errors."""


class ConfigError(FlowNidsError):
    """Invalid or inconsistent run configuration."""


class DataError(FlowNidsError):
    """Input data violates a structural requirement."""


class SchemaError(DataError):
    """Column mapping does not match the input file."""


class ScenarioError(DataError):
    """Scenario construction constraint violated (overlap, purity, ...)."""


class NumericError(FlowNidsError):
    """Non-finite value encountered in the numerical core."""
