"""Exception hierarchy shared by every module."""


class PTreeError(Exception):
    """Base class for all errors raised by ptree."""


class EmptyDomain(PTreeError):
    """The declared sample space has zero extent in some dimension."""


class DepthNegative(PTreeError):
    """A negative maximum tree depth was requested."""


class ZeroMass(PTreeError):
    """The base measure assigns zero mass to a node that holds data."""


class InvalidPrior(PTreeError):
    """A beta pseudo-count or transition matrix is not admissible."""


class OutOfDomain(PTreeError):
    """A query point lies outside the sample space."""


class NumericalUnderflow(PTreeError):
    """A marginal likelihood ratio collapsed to zero."""


class NodeBudgetExceeded(PTreeError):
    """The multivariate expansion outgrew the configured node budget."""

    def __init__(self, depth, budget):
        super().__init__(
            f"expansion exceeded node budget of {budget} nodes at depth {depth}")
        self.depth = depth
        self.budget = budget


class UnknownScenario(PTreeError):
    """No reference density is registered under the requested name."""


class DomainError(PTreeError):
    """A density was evaluated on the boundary of its open support."""


class GridMismatch(PTreeError):
    """Estimate and truth grids do not have the same shape."""


class DataParseError(PTreeError):
    """A CSV row could not be parsed as numeric data."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ModelVersionError(PTreeError):
    """A model file carries an unrecognised format version."""


class ConfigError(PTreeError):
    """A run configuration or plan failed validation."""
