"""Exception hierarchy; the CLI maps DomainError to exit 1 and IOError-like failures to exit 2."""


class MoaOffError(Exception):
    pass


class DomainError(MoaOffError, ValueError):
    """Input outside the mathematical domain of an operation."""


class CalibrationError(DomainError):
    pass


class ParseError(MoaOffError):
    """Malformed file content (image, workload, calibration or config)."""


class ConfigError(DomainError):
    pass
