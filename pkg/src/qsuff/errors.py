"""Exception hierarchy."""


class QsuffError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(QsuffError, ValueError):
    pass


class NonHermitianInput(QsuffError, ValueError):
    pass


class NonHermitianChoi(NonHermitianInput):
    pass


class NegativeInput(QsuffError, ValueError):
    pass


class NotADensityMatrix(QsuffError, ValueError):
    pass


class DomainError(QsuffError, ValueError):
    """A function was evaluated outside its domain on some eigenvalue."""


class SingularState(QsuffError, ValueError):
    """A state that must be faithful has a nontrivial kernel."""


class NotFaithful(QsuffError, ValueError):
    """An experiment whose average state is not faithful."""


class NotJordanClosed(QsuffError, ValueError):
    pass


class NontrivialCenter(QsuffError, ValueError):
    pass


class NotInvariant(QsuffError, ValueError):
    pass


class PositivityUnverified(QsuffError, ValueError):
    """A map lacks the positivity evidence required by the caller."""


class InconsistentVerdict(QsuffError, RuntimeError):
    """Equivalent recovery conditions disagree at the current tolerances."""


class NumericalDegeneracy(QsuffError, RuntimeError):
    """A generic-position construction failed on every retry."""


class UnsupportedParameters(QsuffError, ValueError):
    pass


class LabelMismatch(QsuffError, ValueError):
    pass


class CertificateInvalid(QsuffError, RuntimeError):
    pass


class ParseError(QsuffError, ValueError):
    pass
