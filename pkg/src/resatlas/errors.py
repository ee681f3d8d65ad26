"""Exception hierarchy shared by all resatlas modules."""


class ResatlasError(Exception):
    """Base class for every error raised by resatlas."""


class NonFinite(ResatlasError, ValueError):
    pass


class NotHermitian(ResatlasError, ValueError):
    def __init__(self, name, defect, tol):
        self.name = name
        self.defect = defect
        self.tol = tol
        super().__init__(f"NotHermitian({name}): defect {defect:.3e} exceeds {tol:.3e}")


class DimensionMismatch(ResatlasError, ValueError):
    pass


class NoConvergence(ResatlasError, RuntimeError):
    pass


class SpectrumHit(ResatlasError, ValueError):
    """Raised when z is numerically inside the spectrum of a Hermitian matrix."""

    def __init__(self, z, distance, eigenvalue):
        self.z = z
        self.distance = distance
        self.eigenvalue = eigenvalue
        super().__init__(
            f"SpectrumHit: z={z} lies within {distance:.3e} of eigenvalue {eigenvalue:.12g}"
        )


class CouplingCollision(ResatlasError, ValueError):
    """The shift s coincides with a resonance value at z."""

    def __init__(self, z, s, resonance):
        self.z = z
        self.s = s
        self.resonance = resonance
        super().__init__(f"CouplingCollision: s={s} equals resonance {resonance} at z={z}")


class BadSpec(ResatlasError, ValueError):
    pass


class ParseError(ResatlasError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"ParseError: {message}{where}")


class SchemaError(ResatlasError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"SchemaError[{field}]: {message}")


class CardinalityMismatch(ResatlasError, ValueError):
    pass


class StepCollapse(ResatlasError, RuntimeError):
    """Adaptive continuation could not proceed without going below ``min_step``."""

    def __init__(self, location, step, reason):
        self.location = location
        self.step = step
        self.reason = reason
        super().__init__(f"StepCollapse near z={location} (step {step:.3e}): {reason}")


class DepthExceeded(ResatlasError, RuntimeError):
    def __init__(self, cells):
        self.cells = cells
        super().__init__(f"DepthExceeded: {len(cells)} unresolved cells")


class InsufficientDecades(ResatlasError, RuntimeError):
    pass
