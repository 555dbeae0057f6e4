"""Exception hierarchy.

Everything raised intentionally by this package derives from QactError so
callers can catch one type at the CLI boundary.
"""


class QactError(Exception):
    pass


class AlgebraMismatch(QactError):
    """Two elements or maps belong to different algebras."""


class ShapeMismatch(QactError):
    """An array has the wrong shape for the requested operation."""


class ValidationFailure(QactError):
    """A structural check failed beyond tolerance (bad input data)."""


class DegreeOverflow(QactError):
    """A presented-algebra computation left the guaranteed-exact degree window."""


class NumericalRankFailure(QactError):
    """A rank or spectral-gap decision was too close to call at the working tolerance."""
