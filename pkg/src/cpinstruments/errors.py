"""Exception hierarchy shared by every module of the package."""


class InstrumentError(ValueError):
    """Base class for all errors raised by :mod:`cpinstruments`."""


class NotHermitian(InstrumentError):
    pass


class NotPSD(InstrumentError):
    pass


class NotCP(InstrumentError):
    pass


class NotIsometry(InstrumentError):
    pass


class NotUnitary(InstrumentError):
    pass


class NotUnital(InstrumentError):
    pass


class NotNormalized(InstrumentError):
    pass


class SpecMismatch(InstrumentError):
    pass


class ShapeMismatch(InstrumentError):
    pass


class Mismatch(InstrumentError):
    pass


class CoefficientsNotNormalized(InstrumentError):
    pass


class NotDominated(InstrumentError):
    pass


class InvalidDerivative(InstrumentError):
    pass


class NotAnAlgebra(InstrumentError):
    pass


class TheoryViolation(InstrumentError):
    """A numerical outcome contradicted a structural theorem.

    Never mapped to a negative verdict; callers must surface it.
    """


class CheckFailed(InstrumentError):
    """A certificate failed re-verification.

    ``clause`` names the first violated check.
    """

    def __init__(self, clause, detail=""):
        self.clause = clause
        self.detail = detail
        super().__init__(f"{clause}: {detail}" if detail else clause)


class ParseError(InstrumentError):
    """Malformed instrument or certificate file.

    ``path`` is a field path such as ``maps[0].choi[1]``; ``line`` is set for
    JSON syntax errors.
    """

    def __init__(self, message, path="", line=None):
        self.path = path
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if path:
            where.append(path)
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ShapeError(ParseError):
    pass
