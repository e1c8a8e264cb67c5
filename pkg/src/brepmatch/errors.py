"""Exception hierarchy shared by every brepmatch module."""


class BRepMatchError(Exception):
    exit_code = 1


class InputError(BRepMatchError):
    """Bad input data; the CLI maps these to exit code 2."""

    exit_code = 2


class ParseError(InputError):
    pass


class SchemaError(InputError):
    pass


class ValidationError(InputError):
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DegenerateFrame(InputError):
    pass


class InvalidTolerance(InputError):
    pass


class DuplicateId(InputError):
    pass


class FrameMismatch(InputError):
    pass


class ModelMismatch(InputError):
    pass


class InvalidCandidate(InputError):
    pass


class ShapeError(InputError):
    pass


class CheckpointError(InputError):
    pass


class EmptyDataset(InputError):
    pass


class NumericError(BRepMatchError):
    """Numerical failure; exit code 3."""

    exit_code = 3


class DomainError(NumericError):
    pass


class NonFiniteLoss(NumericError):
    pass


class NoEligibleTarget(BRepMatchError):
    pass


class RejectedEdit(BRepMatchError):
    pass
