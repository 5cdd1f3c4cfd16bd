"""Exception types shared across the package.

All numerical failure modes raise subclasses of :class:`GrqiError`, so
callers (in particular the CLI and the experiment drivers) can catch one
base class and record the failure instead of aborting a batch.
"""


class GrqiError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(GrqiError):
    """Operands have incompatible shapes."""


class RankDeficientError(GrqiError):
    """A matrix that must have full column rank does not."""


class ZeroVectorError(GrqiError):
    """A vector argument is (numerically) zero."""


class NotHermitianError(GrqiError):
    """A matrix required to be Hermitian is not, beyond tolerance."""


class NearDefectiveError(GrqiError):
    """Eigenvector basis of a small block is too ill-conditioned to trust."""


class SolveFailedError(GrqiError):
    """A shifted linear solve produced nonfinite values even after the
    fallback perturbation."""


class SingularPencilShiftError(SolveFailedError):
    """A shifted pencil solve stayed nonfinite after perturbation."""


class SpectraOverlapError(GrqiError):
    """The two coefficient matrices of a Sylvester equation have
    (numerically) intersecting spectra."""


class BiorthogonalityLostError(GrqiError):
    """Left and right vectors became orthogonal, so the two-sided Rayleigh
    quotient is undefined."""


class GramSingularError(GrqiError):
    """The cross Gram matrix of a left-right basis pair is numerically
    singular."""


class OddDimensionError(GrqiError):
    """An operation requiring even dimension (block symplectic form) was
    given an odd-sized matrix."""


class UnpairedEigenvalueError(GrqiError):
    """An eigenvalue has no mirror partner across the imaginary axis within
    the matching tolerance."""


class NotSpectralError(GrqiError):
    """The selected eigenvalue subset is not separated from the rest of the
    spectrum, so it does not define a spectral subspace."""


class DegeneratePencilError(GrqiError):
    """No usable normalization of the pencil was found (shifted combination
    singular or too ill-conditioned)."""


class MissingOracleError(GrqiError):
    """Summary statistics were requested from traces that carry no oracle
    error columns."""


class ParseError(GrqiError):
    """A matrix file could not be parsed.

    Carries the 1-based line number where parsing failed.
    """

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc += str(path)
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


class UnsupportedFormatError(GrqiError):
    """The matrix file is valid but uses an unsupported layout (for example
    sparse coordinate data, or a symmetry other than general)."""
