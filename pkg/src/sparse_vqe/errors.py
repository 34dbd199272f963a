"""Exception types raised across the package."""


class SparseVQEError(Exception):
    """Base class for all package errors."""


class InputFormatError(SparseVQEError, ValueError):
    """Malformed or inconsistent input file."""


class DimensionTooLarge(SparseVQEError):
    """Dense reconstruction requested above the desk-scale guard."""


class InvalidTolerance(SparseVQEError, ValueError):
    pass


class MismatchedParent(SparseVQEError):
    pass


class NotConjugateClosed(SparseVQEError, ValueError):
    pass


class DuplicateMonomial(SparseVQEError, ValueError):
    pass


class NotOneSparse(SparseVQEError):
    pass


class RegisterMismatch(SparseVQEError, ValueError):
    pass


class DimensionMismatch(SparseVQEError, ValueError):
    pass


class AncillaNotZeroed(SparseVQEError):
    pass


class AncillaResidue(SparseVQEError):
    """Ancilla registers not restored after an oracle-faithful application.

    This always indicates a bug in the oracle sequence, never bad input.
    """


class IncompletePlan(SparseVQEError, ValueError):
    pass
