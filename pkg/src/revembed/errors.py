"""Exception hierarchy shared by all modules."""


class RevembedError(Exception):
    """Base class for every error raised by this package."""


class InputError(RevembedError, ValueError):
    """Malformed or out-of-contract input."""


class NumericalError(RevembedError, ArithmeticError):
    """A numerical procedure failed to deliver a trustworthy result."""


class DimensionMismatch(InputError):
    pass


class NotSymmetric(InputError):
    def __init__(self, asymmetry, tol):
        super().__init__(f"matrix is not symmetric: max|S_ij - S_ji| = {asymmetry:.3e} > {tol:.3e}")
        self.asymmetry = asymmetry
        self.tol = tol


class NoConvergence(NumericalError):
    pass


class Overflow(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


class NegativeEntry(InputError):
    def __init__(self, i, j, value):
        super().__init__(f"negative entry at ({i}, {j}): {value!r}")
        self.i, self.j, self.value = i, j, value


class RowSum(InputError):
    def __init__(self, i, value, target):
        super().__init__(f"row {i} sums to {value!r}, expected {target!r}")
        self.i, self.value, self.target = i, value, target


class NotStrictlyPositive(InputError):
    pass


class NotTridiagonal(InputError):
    pass


class ZeroTransition(InputError):
    pass


class NonPositiveSpectrum(InputError):
    def __init__(self, eigenvalue):
        super().__init__(f"spectrum is not strictly positive: eigenvalue {eigenvalue!r}")
        self.eigenvalue = eigenvalue


class NotReversibleForP(InputError):
    pass


class SeriesDivergence(NumericalError):
    pass


class ZeroB(InputError):
    pass


class ParameterOutOfRange(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, line=None, col=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", col {col})" if col is not None else ")")
        super().__init__(message + where)
        self.line, self.col = line, col


class NonNumeric(ParseError):
    pass
