"""Exception hierarchy with stable machine-readable codes for the CLI."""


class EustatError(Exception):
    code = "internal"
    module = "eustat"

    def record(self):
        return {"code": self.code, "module": self.module, "message": str(self)}


class NonZeroMeanError(EustatError):
    code = "non_zero_mean"
    module = "spectral"


class InvalidExponentError(EustatError):
    code = "invalid_exponent"
    module = "spectral"


class BallOutsideBoxError(EustatError):
    code = "ball_outside_box"
    module = "spectral"


class KernelUnderresolvedError(EustatError):
    code = "kernel_underresolved"
    module = "spectral"


class SupportTooLargeError(EustatError):
    code = "support_too_large"
    module = "radial"


class CflViolationError(EustatError):
    code = "cfl_violation"
    module = "solver"


class BoundaryLeakError(EustatError):
    code = "boundary_leak"
    module = "solver"


class TimeNotSavedError(EustatError):
    code = "time_not_saved"
    module = "solver"


class ViscousTrajectoryError(EustatError):
    code = "viscous_trajectory"
    module = "solver"


class GridMismatchError(EustatError):
    code = "grid_mismatch"
    module = "ensemble"


class BadWeightsError(EustatError):
    code = "bad_weights"
    module = "ensemble"


class ClassViolationError(EustatError):
    code = "class_violation"
    module = "ensemble"


class MemberError(EustatError):
    """Wraps a per-member failure during an ensemble pushforward."""

    code = "member_failed"
    module = "ensemble"

    def __init__(self, member, cause):
        super().__init__(f"member {member}: {cause}")
        self.member = member
        self.cause = cause


class FormatError(EustatError):
    code = "format"
    module = "io"


class CorruptFieldError(EustatError):
    code = "corrupt_field"
    module = "io"


class ConfigParseError(EustatError):
    code = "parse"
    module = "config"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigValidationError(EustatError):
    code = "validation"
    module = "config"
