"""Exception hierarchy shared by every selguide module."""


class SelguideError(Exception):
    """Base class for all errors raised by this package."""


class InvalidScheduleConfig(SelguideError, ValueError):
    pass


class DimensionMismatch(SelguideError, ValueError):
    pass


class UnknownLabel(SelguideError, KeyError):
    pass


class InvalidMixture(SelguideError, ValueError):
    pass


class InvalidGuidance(SelguideError, ValueError):
    pass


class SeedMismatch(SelguideError, ValueError):
    pass


class EmptySet(SelguideError, ValueError):
    pass


class DegenerateFit(SelguideError, ValueError):
    pass


class InvalidSweep(SelguideError, ValueError):
    pass


class ConfigError(SelguideError, ValueError):
    """Malformed or invalid configuration. ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
