"""Exception types raised across the package."""


class MechpackError(Exception):
    """Base class for all package errors."""


class NotWatertight(MechpackError):
    pass


class DegenerateInput(MechpackError):
    pass


class InvalidMesh(MechpackError):
    pass


class ObjParseError(MechpackError):
    pass


class LoopClosureViolation(MechpackError):
    pass


class UnknownJoint(MechpackError):
    pass


class InvalidMechanism(MechpackError):
    """Raised when a mechanism document or object fails validation.

    ``violations`` holds the individual rule failures.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class NoAdmissibleConfiguration(MechpackError):
    pass


class DoesNotFit(MechpackError):
    def __init__(self, message, group_id=None):
        super().__init__(message)
        self.group_id = group_id


class GroupTooLarge(DoesNotFit):
    pass


class EmptyLayout(MechpackError):
    pass
