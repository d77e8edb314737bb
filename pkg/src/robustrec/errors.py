class RobustRecError(Exception):
    pass


class DataError(RobustRecError):
    """Raised when a dataset cannot be ingested or violates its schema."""


class SchemaViolation(DataError):
    pass


class ConfigError(RobustRecError):
    pass


class TransformError(RobustRecError, ValueError):
    pass


class UndefinedMetricError(RobustRecError, ValueError):
    """The metric has no defined value for the given input (e.g. single-class AUC)."""
