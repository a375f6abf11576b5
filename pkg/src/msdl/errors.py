"""Exception hierarchy shared by every module.

Each exception carries an ``exit_code`` that the CLI maps to a process
exit status, plus a free-form ``details`` dict that ends up in reports.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERTIFICATE = 3
EXIT_SOLVER = 4
EXIT_IO = 5


class MSDLError(Exception):
    exit_code = EXIT_SOLVER

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": self.message, **self.details}


# geometry / configuration -------------------------------------------------

class ConfigError(MSDLError):
    exit_code = EXIT_CONFIG


class InvalidGeometryError(ConfigError):
    pass


class OutOfDomainError(MSDLError):
    exit_code = EXIT_CONFIG


class DisjointnessError(ConfigError):
    pass


class PreconditionError(ConfigError):
    pass


# numerics -----------------------------------------------------------------

class DomainMismatchError(MSDLError):
    pass


class UndersampledError(MSDLError):
    pass


class NonvanishingViolated(MSDLError):
    pass


class DegreeExhausted(MSDLError):
    pass


class ConditioningError(MSDLError):
    pass


class IllDefinedImmersion(MSDLError):
    pass


class NonflatMarginError(MSDLError):
    pass


class PerturbationFailed(MSDLError):
    pass


class BasisPointsExhausted(MSDLError):
    pass


class TauTooLarge(MSDLError):
    pass


class NewtonFailed(MSDLError):
    pass


class InexactPeriods(MSDLError):
    pass


class FluxUnreachable(MSDLError):
    pass


class InconsistentTarget(ConfigError):
    pass


class InfeasibleLabyrinth(MSDLError):
    pass


# certificates ---------------------------------------------------------------

class StarViolated(MSDLError):
    exit_code = EXIT_CERTIFICATE


class HInvalid(MSDLError):
    exit_code = EXIT_CERTIFICATE


class NoCertificate(MSDLError):
    exit_code = EXIT_CERTIFICATE


class StageFailure(MSDLError):
    """A run stage violated one of its lettered conditions."""

    exit_code = EXIT_CERTIFICATE


class ReportIOError(MSDLError):
    exit_code = EXIT_IO
