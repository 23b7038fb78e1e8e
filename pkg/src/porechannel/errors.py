"""Exception hierarchy shared across the package."""


class PorechannelError(Exception):
    """Base class for all package errors."""


class ConfigError(PorechannelError):
    """Invalid configuration, flags, or parameter combination."""


class DataError(PorechannelError):
    """Malformed or inconsistent input data (tables, traces, instances)."""


class ModelIngestError(DataError):
    """A k-mer model table could not be ingested."""


class InfeasibleTraceError(PorechannelError):
    """No (states, durations) assignment is consistent with (m, T_m, Lambda)."""


class UndefinedEntropyError(PorechannelError):
    """Entropy requested for a graph/component on which it is undefined."""


class ModelMismatchError(PorechannelError):
    """Posterior mass observed on transitions the kernel assigns zero probability."""
