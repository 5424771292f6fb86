"""Exception hierarchy shared by every module of the package."""


class ChcError(Exception):
    """Base class for all errors raised by cddhorn."""


class SortError(ChcError, TypeError):
    pass


class NonLinear(ChcError):
    pass


class UnknownPredicate(ChcError, KeyError):
    pass


class NotRecursionFree(ChcError):
    pass


class NotCDD(ChcError):
    pass


class NotShared(ChcError):
    pass


class ExpansionBudget(ChcError):
    pass


class CorrespondenceError(ChcError):
    pass


class ParseError(ChcError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


class UnsupportedFeature(ParseError):
    pass


class NoQuery(ChcError):
    pass


class ResourceExhausted(ChcError):
    """A search or elimination budget ran out before an answer was found."""


class BackendError(ChcError):
    """The interpolation backend crashed (distinct from an Unknown answer)."""


class SolverUnknown(ChcError):
    pass


class IncompleteSolution(ChcError):
    pass


class ValidationUnknown(ChcError):
    pass


class OracleTooLarge(ChcError):
    pass
