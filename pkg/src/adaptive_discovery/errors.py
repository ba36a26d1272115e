"""Exception hierarchy shared by every module."""


class DiscoveryError(Exception):
    """Base class for all package errors."""


class PayloadMismatchError(DiscoveryError, TypeError):
    """An item payload does not fit the environment variant."""


class HorizonError(DiscoveryError, ValueError):
    """Requested horizon exceeds the candidate pool."""


class PosteriorError(DiscoveryError, ArithmeticError):
    """A posterior computation produced a non-PD or non-finite result."""


class IncompatibleError(DiscoveryError, TypeError):
    """Policy, posterior engine and environment cannot be combined."""


class EnumerationTooLarge(DiscoveryError, ValueError):
    """An exact enumeration would exceed the configured state budget."""


class DatasetError(DiscoveryError, ValueError):
    """A replay dataset file is malformed."""


class ConfigError(DiscoveryError, ValueError):
    """Configuration schema violation (unknown key or bad value)."""


class InvalidCombination(ConfigError):
    """Individually valid settings that cannot be used together."""


class RunError(DiscoveryError):
    """An episode inside an experiment failed; the message names the run."""
