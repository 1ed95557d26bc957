"""Exception hierarchy shared by every module of the package."""


class HinError(Exception):
    """Base class for all domain errors raised by this package."""


class UnknownEndpoint(HinError):
    pass


class NegativeWeight(HinError):
    pass


class DuplicateEdge(HinError):
    pass


class NonStochasticSimilarity(HinError):
    pass


class NotAnAction(HinError):
    pass


class NotAUser(HinError):
    pass


class NoConvergence(HinError):
    pass


class CandidateIsNeighbor(HinError):
    pass


class NoActions(HinError):
    pass


class NoEligibleItems(HinError):
    pass


class TooManyActions(HinError):
    pass


class TypeConflict(HinError):
    pass


class InfeasibleParams(HinError):
    pass


class VerificationFailed(HinError):
    """The search produced a set that the full recomputation does not confirm."""


class ParseError(HinError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason
