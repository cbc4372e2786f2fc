"""Exception types shared across the package."""


class DinetError(Exception):
    """Base class for all errors raised by this package."""


class ModelError(DinetError):
    """A generative network or corruption model is ill-formed."""


class ConfigError(DinetError):
    """A configuration file could not be parsed or validated."""


class GraphError(DinetError):
    """A graph query was malformed (bad nodes, non-adjacent trail, ...)."""


class EstimationError(DinetError):
    """Estimator inputs are inconsistent or an estimate is defective."""


class OracleError(DinetError):
    """An exact computation was requested outside its domain of validity."""
