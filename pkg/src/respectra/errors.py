"""Exception hierarchy shared by the library and the command line."""


class RespectraError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(RespectraError, ValueError):
    """Malformed or inconsistent input file or parameter set."""

    exit_code = 2

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        loc = ""
        if path is not None:
            loc = str(path)
        if line is not None:
            loc += f":{line}"
            if column is not None:
                loc += f":{column}"
        super().__init__(f"{loc}: {message}" if loc else message)


class ContractError(RespectraError, ValueError):
    """A documented precondition of an operation was violated."""

    exit_code = 3


class UnmodeledPhaseError(RespectraError):
    """The requested magnetic phase has no model (the intermediate phase)."""

    exit_code = 4


class AmbiguousIrrepError(ContractError):
    """Gamma3 and Gamma4 weights of a state are equal; no label can be assigned."""
