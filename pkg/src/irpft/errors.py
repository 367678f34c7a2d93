"""Exception types shared across the library."""


class AllWeightsZero(RuntimeError):
    """Every candidate weight is zero; nothing carries likelihood."""


class MismatchedCardinality(ValueError):
    """Two particle sets that must share a particle count do not."""


class ZeroProposalDensity(ValueError):
    """An importance-sampling proposal assigned zero density to its own sample."""


class UnknownDistribution(KeyError):
    """A sample batch referenced a distribution id with no registered evaluator."""


class EmptyAccumulator(RuntimeError):
    """An estimate was requested from an accumulator holding no samples."""


class EmptyTrajectory(ValueError):
    """A trajectory record holds no steps."""


class EmptyDataset(RuntimeError):
    """Estimation was requested from an empty trajectory dataset."""


class NoCandidates(RuntimeError):
    """A reuse candidate was requested from an empty candidate index."""


class ConfigError(ValueError):
    """Invalid benchmark or planner configuration."""
