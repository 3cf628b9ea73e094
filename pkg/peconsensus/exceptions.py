"""Exceptions raised by peconsensus.

Every class derives from :py:class:`PEConsensusError` and from the builtin
exception a caller would naturally catch (``ValueError`` for bad input,
``RuntimeError`` for failed checks or generation).
"""

__all__ = ["PEConsensusError", "HypothesisViolation", "DegenerateInput",
           "NonFiniteState", "InvariantBreach", "InvalidInterval",
           "PEViolated", "InternalVerificationFailure", "GenerationFailed",
           "DimensionMismatch", "PreconditionFailed", "ZeroDirection",
           "EmptyAggregate", "DegenerateFit", "ConfigError"]


class PEConsensusError(Exception):
    """Base class of all peconsensus errors."""


class HypothesisViolation(PEConsensusError, ValueError):
    """A model hypothesis (H1, H2 or H3) does not hold."""

    def __init__(self, hypothesis, msg):
        self.hypothesis = hypothesis
        super().__init__('(%s) %s' % (hypothesis, msg))


class DegenerateInput(PEConsensusError, ValueError):
    """Input too small to define the model (e.g. fewer than two agents)."""


class NonFiniteState(PEConsensusError, ArithmeticError):
    """A state contains NaN or infinite coordinates."""

    def __init__(self, msg, time=None):
        self.time = time
        if time is not None:
            msg = '%s (t=%r)' % (msg, time)
        super().__init__(msg)


class InvariantBreach(PEConsensusError, RuntimeError):
    """A runtime-checked property failed. ``report`` holds the witness."""

    def __init__(self, msg, report=None):
        self.report = report
        super().__init__(msg)


class InvalidInterval(PEConsensusError, ValueError):
    """Integration bounds are reversed or negative."""


class PEViolated(PEConsensusError, ValueError):
    """A schedule fails the persistent excitation condition."""

    def __init__(self, msg, witness_time=None, margin=None, report=None):
        self.witness_time = witness_time
        self.margin = margin
        self.report = report
        super().__init__(msg)


class InternalVerificationFailure(PEConsensusError, RuntimeError):
    """A generator produced a schedule that fails its own guarantee."""


class GenerationFailed(PEConsensusError, RuntimeError):
    """Rejection sampling exhausted its retry budget."""


class DimensionMismatch(PEConsensusError, ValueError):
    """Operation only defined for another state dimension."""


class PreconditionFailed(PEConsensusError, ValueError):
    """The precondition of a runtime check does not hold on the input."""


class ZeroDirection(PEConsensusError, ValueError):
    """Projection direction is the zero vector."""


class EmptyAggregate(PEConsensusError, RuntimeError):
    """No trial converged for some value of mu."""


class DegenerateFit(PEConsensusError, ValueError):
    """Least-squares fit is undefined (e.g. all abscissae equal)."""


class ConfigError(PEConsensusError, ValueError):
    """Invalid run configuration. ``lineno`` points into the file if known."""

    def __init__(self, msg, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ''
        if path is not None:
            where = '%s:' % path
        if lineno is not None:
            where += '%d:' % lineno
        super().__init__('%s %s' % (where, msg) if where else msg)
