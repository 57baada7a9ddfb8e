"""Exception types raised by the simulation and verification code."""


class KakutaniError(Exception):
    """Base class for all package errors."""


class InvalidDrawError(KakutaniError, ValueError):
    """A splitting draw fell outside the open unit interval."""


class InvalidThresholdError(KakutaniError, ValueError):
    """A threshold t <= 0 was requested (N_t would be infinite)."""


class InvalidRegistrationError(KakutaniError, ValueError):
    """A small-gap statistic was registered (or queried) inconsistently."""


class UnsupportedObservableError(KakutaniError, ValueError):
    """The requested observable was not retained by the engine."""


class RegimeError(KakutaniError, ValueError):
    """Parameters fall outside the regime where an operation is defined."""


class DomainError(KakutaniError, ValueError):
    """A closed-form function was evaluated outside its domain."""


class ConfigError(KakutaniError, ValueError):
    """An experiment or CLI configuration is invalid."""


class DegeneratePathError(KakutaniError, ArithmeticError):
    """A gap length underflowed below the floating point floor."""


class ResourceError(KakutaniError, RuntimeError):
    """A budget (memory, recursion nodes, enumeration size) was exceeded."""
