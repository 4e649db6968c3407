"""Exception types shared across the package."""


class CoverageGaError(Exception):
    """Base class for all package-specific errors."""


class ParseError(CoverageGaError, ValueError):
    """Malformed input file; carries the offending path and 1-based line."""

    def __init__(self, message, path=None, line=None):
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)
        self.path = None if path is None else str(path)
        self.line = line


class InsufficientPointsError(CoverageGaError, ValueError):
    """An operation that needs at least two points received fewer."""


class InsufficientCorrespondencesError(CoverageGaError, ValueError):
    """Homography estimation needs at least four point correspondences."""


class DegenerateConfigurationError(CoverageGaError, ArithmeticError):
    """The input geometry admits no unique, invertible solution."""


class PointAtInfinityError(CoverageGaError, ArithmeticError):
    """A projective mapping sent a point to (or numerically near) infinity."""
