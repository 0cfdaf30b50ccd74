"""Exception hierarchy shared by every module of the package."""


class SpectraError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 3


class ConfigError(SpectraError, ValueError):
    exit_code = 2


class ConstructionFailure(SpectraError):
    """A profile interpolant violated a monotonicity/positivity constraint."""


class DegenerateMode(SpectraError, ValueError):
    exit_code = 2


class SingularCoefficient(SpectraError):
    pass


class MultipleEigenvalues(SpectraError):
    pass


class PositivityViolation(SpectraError):
    pass


class OverflowGuard(SpectraError):
    pass


class RankDeficiency(SpectraError):
    pass


class ZoneViolation(SpectraError, ValueError):
    exit_code = 2


class HypothesisViolation(SpectraError):
    def __init__(self, hypothesis, detail=""):
        self.hypothesis = hypothesis
        super().__init__(f"hypothesis ({hypothesis}) violated: {detail}")


class CertificationFailure(SpectraError):
    pass


class PartitionFailure(SpectraError):
    pass


class StepMismatch(SpectraError):
    def __init__(self, j, deviation):
        self.j = j
        self.deviation = deviation
        super().__init__(f"Vafa-Witten step mismatch at j={j}: deviation {deviation!r}")


class TrackingLoss(SpectraError):
    pass


class ModeSolveError(SpectraError):
    """Wraps a per-mode failure with the offending mode attached."""

    def __init__(self, mode, cause):
        self.mode = mode
        self.cause = cause
        super().__init__(f"mode (k={mode.k}, m={mode.m}): {cause}")
