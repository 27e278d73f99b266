"""Exception hierarchy shared by all harvestsim modules."""


class HarvestError(Exception):
    """Base class for every error raised by harvestsim."""


class InputError(HarvestError, ValueError):
    """Bad user input: malformed files, invalid config, violated preconditions."""


class ParseError(InputError):
    """A file did not conform to its expected format.

    ``row`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message, row=None, source=None):
        self.row = row
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if row is not None:
            where.append(f"row {row}")
        prefix = (", ".join(where) + ": ") if where else ""
        super().__init__(prefix + message)


class InsufficientDataError(InputError):
    pass


class DegenerateGeometryError(InputError):
    pass


class DuplicateKeyError(InputError):
    pass


class IncompatibleMeshError(InputError):
    pass


class SingularCircuitError(InputError, ZeroDivisionError):
    pass


class UndefinedEfficiencyError(InputError, ZeroDivisionError):
    pass


class UnderdeterminedFitError(InputError):
    pass


class OverVoltageError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class FitError(HarvestError, RuntimeError):
    """Least-squares solver failed to converge; ``diagnostics`` holds the trail."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)
