"""Exception types shared across the benchmark, mapped to CLI exit codes."""


class ParameterError(ValueError):
    """An operation was called with arguments outside its contract."""


class ConfigError(ValueError):
    """Bad or unknown configuration input. CLI exit code 2."""


class DataError(RuntimeError):
    """Missing or undecodable input data. CLI exit code 3."""


class CalibrationError(RuntimeError):
    """Calibration missed one of its targets. CLI exit code 4."""
