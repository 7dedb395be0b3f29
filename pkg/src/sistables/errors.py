"""Exception hierarchy. Each family maps onto a CLI exit code."""


class SisError(Exception):
    exit_code = 1


class ConfigError(SisError, ValueError):
    exit_code = 2


class MarginsError(ConfigError):
    pass


class EmptyMargins(MarginsError):
    pass


class TotalMismatch(MarginsError):
    pass


class EntryTooLarge(MarginsError):
    pass


class OutOfRange(ConfigError):
    pass


class ParamMismatch(ConfigError):
    pass


class WindowInvalid(SisError):
    pass


class InfeasibleInstance(SisError):
    exit_code = 3


class InfeasibleFamily(InfeasibleInstance, ValueError):
    pass


class NoAdmissibleAssignment(InfeasibleInstance):
    pass


class TooLarge(SisError):
    exit_code = 4


class ZeroCount(SisError, ValueError):
    pass
