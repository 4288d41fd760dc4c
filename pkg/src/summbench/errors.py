"""Exception hierarchy for the benchmark framework."""


class SummbenchError(Exception):
    """Base class for all framework errors."""


class ValidationError(SummbenchError):
    """A domain object violates one of its invariants."""


class RegistrationError(SummbenchError):
    """Metric registry misuse (duplicate or unknown name)."""


class PreconditionError(SummbenchError):
    """An operation was called outside its contract."""


class BackendError(SummbenchError):
    """A scoring backend failed (after retries, where applicable)."""


class DegenerateBackendError(BackendError):
    """Backend returned output no score can be derived from."""


class ExtractionError(SummbenchError):
    """Statement decomposition produced nothing usable."""


class ConstantInputError(SummbenchError):
    """Correlation requested on a constant series; coefficient undefined."""


class DatasetError(SummbenchError):
    """Dataset file missing, malformed, or empty after validation."""


class ConfigError(SummbenchError):
    """Run configuration invalid (unknown key, bad value, missing field)."""
