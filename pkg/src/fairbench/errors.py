"""Error taxonomy shared by all fairbench modules.

Every failure mode has its own exception class with a stable ``code``
string, so callers (and the CLI's machine-readable error output) can
dispatch without parsing messages.
"""

from __future__ import annotations


class FairbenchError(Exception):
    """Base class for all fairbench errors."""

    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message


# -- corpus ------------------------------------------------------------

class MalformedFile(FairbenchError):
    code = "MalformedFile"


class DimensionMismatch(FairbenchError):
    code = "DimensionMismatch"


class DanglingId(FairbenchError):
    code = "DanglingId"


class InconsistentIdentityAttribute(FairbenchError):
    code = "InconsistentIdentityAttribute"


class ZeroVector(FairbenchError):
    code = "ZeroVector"


# -- geometry ----------------------------------------------------------

class UnknownId(FairbenchError):
    code = "UnknownId"


class NotNormalized(FairbenchError):
    code = "NotNormalized"


class KTooLarge(FairbenchError):
    code = "KTooLarge"


class NonFiniteInput(FairbenchError):
    code = "NonFiniteInput"


# -- pairs -------------------------------------------------------------

class NotEnoughPairs(FairbenchError):
    code = "NotEnoughPairs"


class UnlabeledSet(FairbenchError):
    code = "UnlabeledSet"


# -- verify ------------------------------------------------------------

class SingleClassInput(FairbenchError):
    code = "SingleClassInput"


class TooFewSubgroups(FairbenchError):
    code = "TooFewSubgroups"


class EmptyGroup(FairbenchError):
    code = "EmptyGroup"


# -- poseclass ---------------------------------------------------------

class TooFewSamples(FairbenchError):
    code = "TooFewSamples"


class MissingPose(FairbenchError):
    code = "MissingPose"


class NotEnoughCandidates(FairbenchError):
    code = "NotEnoughCandidates"


# -- balance -----------------------------------------------------------

class SingleLevel(FairbenchError):
    code = "SingleLevel"


class EmptyCounts(FairbenchError):
    code = "EmptyCounts"


# -- stats -------------------------------------------------------------

class ConstantTarget(FairbenchError):
    code = "ConstantTarget"


class RankDeficient(FairbenchError):
    code = "RankDeficient"


class ZeroVariance(FairbenchError):
    code = "ZeroVariance"


class Separation(FairbenchError):
    code = "Separation"


class NotConverged(FairbenchError):
    code = "NotConverged"


# -- synth / config ----------------------------------------------------

class InvalidScenario(FairbenchError):
    code = "InvalidScenario"


class InvalidConfig(FairbenchError):
    code = "InvalidConfig"
