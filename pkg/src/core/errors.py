from typing import Any, Dict, Optional


class ParamorphismError(Exception):
    """Base class for every error raised by the library"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, "details": self.details}


# sphere_geometry
class AntipodalPair(ParamorphismError):
    pass


class SamplingExhausted(ParamorphismError):
    pass


class NearPole(ParamorphismError):
    pass


# flows
class StepSizeInvalid(ParamorphismError):
    pass


class QuadratureTooCoarse(ParamorphismError):
    pass


class LayoutInfeasible(ParamorphismError):
    pass


class CollarTooWide(ParamorphismError):
    pass


# braids
class PoleCollision(ParamorphismError):
    pass


class TangentialCrossing(ParamorphismError):
    pass


class StrandMismatch(ParamorphismError):
    pass


class ParseError(ParamorphismError):
    pass


# quasimorphisms / paramorphism
class DiagramDegenerate(ParamorphismError):
    pass


class IncompleteCoefficients(ParamorphismError):
    pass


class EquatorNotPreserved(ParamorphismError):
    pass


# cli
class ConfigInvalid(ParamorphismError):
    pass


class NumericalFailure(ParamorphismError):
    pass


# Failures a Monte Carlo sample may hit; estimators count them instead of aborting
EXTRACTION_ERRORS = (AntipodalPair, PoleCollision, TangentialCrossing, NearPole)
