"""Exception types raised across the toolkit."""


class ChainCompressError(Exception):
    """Base class for all toolkit errors."""


class DisconnectedGraph(ChainCompressError):
    """The adjacency graph of the input is not connected."""


class DetailedBalanceViolated(ChainCompressError):
    """pi_i R_ij != pi_j R_ji beyond tolerance."""


class NonPositiveStationary(ChainCompressError):
    """A stationary vector has a non-positive entry or wrong normalization."""


class AsymmetricAdjacency(ChainCompressError):
    """Adjacency input for a degree-weighted chain is not symmetric."""


class AsymmetryResidual(ChainCompressError):
    """Symmetrization left a residual, signalling broken detailed balance."""


class NegativeTime(ChainCompressError):
    """Propagators are only defined for t >= 0."""


class NonFinite(ChainCompressError):
    """Matrix norms require finite entries."""


class SingularPrincipalBlock(ChainCompressError):
    """A principal block of the fundamental matrix is numerically singular."""


class SingularComplementBlock(ChainCompressError):
    """The complement block of the rate matrix is numerically singular."""


class NonPositiveGamma(ChainCompressError):
    """Killing rates must be strictly positive."""


class KTooLarge(ChainCompressError):
    """Requested selection size is out of range."""


class TooLargeForBruteForce(ChainCompressError):
    """Exhaustive subset search exceeds the enforced size caps."""


class InvalidRSK(ChainCompressError):
    """Spectral-tail slack requires r < s <= k."""


class NullSpaceNotSpanned(ChainCompressError):
    """The supplied basis does not span the Laplacian null space."""


class BoundViolation(ChainCompressError):
    """A proved error bound failed beyond the permitted relative slack."""


class ParseError(ChainCompressError):
    """Malformed input file."""


class AsymmetricInput(ChainCompressError):
    """A matrix file declared or required symmetric has asymmetric entries."""
