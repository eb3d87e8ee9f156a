"""Exception types shared across the package."""


class SpectralTransferError(Exception):
    """Base class for all library errors."""


class GraphError(SpectralTransferError):
    """Invalid graph data (self loops, bad indices, non-finite weights)."""


class DegenerateDegreeError(GraphError):
    """Normalized Laplacian requested on a graph with a zero-degree vertex."""


class InvalidInnerProductError(SpectralTransferError):
    """Inner-product matrix is not Hermitian positive definite."""


class NormalityError(SpectralTransferError):
    """Operator does not commute with its adjoint under the given inner product."""


class DecompositionError(SpectralTransferError):
    """Eigendecomposition failed (defective or ill-conditioned operator)."""


class FilterEvaluationError(SpectralTransferError):
    """Filter is undefined at a requested spectral point."""


class SingularFilterError(SpectralTransferError):
    """Rational filter denominator is singular on the operator."""


class SpectralIntervalError(SpectralTransferError):
    """Operator spectrum escapes the polynomial approximation interval."""


class IntegrationError(SpectralTransferError):
    """Quadrature failed to converge to the requested accuracy."""


class BandError(SpectralTransferError):
    """Signal or operator is inconsistent with the requested frequency band."""


class WeightError(SpectralTransferError):
    """Sampling weight function is nonpositive at a drawn point."""


class DegeneratePerturbationError(SpectralTransferError):
    """Perturbation would leave an empty graph."""


class TopologyError(SpectralTransferError):
    """Channel counts or graph sizes do not chain through the network."""


class ParameterError(SpectralTransferError):
    """Numeric parameter outside its admissible range."""


class TruncationError(SpectralTransferError):
    """Series truncation is not converged to the requested tolerance."""


class SlopeUndefinedError(SpectralTransferError):
    """All medians vanish; a log-log rate cannot be fitted."""


class ParseError(SpectralTransferError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(SpectralTransferError):
    """Invalid experiment configuration."""
