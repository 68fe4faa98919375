"""Exception hierarchy shared by every module.

All domain failures derive from :class:`TrafficModelError` so the CLI can map
them to exit code 1 in one place.
"""


class TrafficModelError(Exception):
    """Base class for domain errors."""


class InvalidParams(TrafficModelError, ValueError):
    pass


class ProbabilityOutOfRange(TrafficModelError, ValueError):
    pass


class EmptySample(TrafficModelError, ValueError):
    pass


class DegenerateSample(TrafficModelError):
    pass


class SupportViolation(TrafficModelError):
    pass


class FitFailed(TrafficModelError):
    pass


class RejectionBudgetExhausted(TrafficModelError):
    pass


class BootstrapDegenerate(TrafficModelError):
    pass


class AllFitsFailed(TrafficModelError):
    pass


class ZeroDenominator(TrafficModelError):
    pass


class UnknownModel(TrafficModelError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EmptyTrace(TrafficModelError):
    pass


class TraceParseError(TrafficModelError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TooFewBursts(TrafficModelError):
    pass


class LinkProfileOutOfRange(TrafficModelError):
    pass


class InsufficientSamples(TrafficModelError):
    pass
