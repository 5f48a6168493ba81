"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`FluxHarmonicsError`, so batch drivers can catch one type and record
the failure instead of aborting.
"""


class FluxHarmonicsError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(FluxHarmonicsError, ValueError):
    pass


# ingest
class IngestError(FluxHarmonicsError, ValueError):
    pass


class MalformedRow(IngestError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NonUniformSampling(IngestError):
    pass


class EmptySeries(IngestError):
    pass


class TooShort(IngestError):
    pass


class NonFiniteValue(IngestError):
    def __init__(self, index: int, value: float):
        self.index = index
        super().__init__(f"non-finite value {value!r} at index {index}")


class QfOutOfRange(IngestError):
    def __init__(self, index: int, value: float):
        self.index = index
        super().__init__(f"quality flag {value!r} outside [0, 1] at index {index}")


# embedding
class WindowZero(FluxHarmonicsError, ValueError):
    pass


class WindowTooLarge(FluxHarmonicsError, ValueError):
    pass


class ConstantRow(FluxHarmonicsError, ValueError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row} of the trajectory matrix is constant")


# decompositions
class KOutOfRange(FluxHarmonicsError, ValueError):
    pass


class SvdFailure(FluxHarmonicsError, RuntimeError):
    pass


class EigFailure(FluxHarmonicsError, RuntimeError):
    pass


class ZeroDensity(FluxHarmonicsError, ValueError):
    pass


class DegenerateCurve(FluxHarmonicsError, ValueError):
    pass


# spectral
class InvalidCutoff(FluxHarmonicsError, ValueError):
    pass


class NoPairs(FluxHarmonicsError, ValueError):
    pass


class ConfigError(FluxHarmonicsError, ValueError):
    pass
