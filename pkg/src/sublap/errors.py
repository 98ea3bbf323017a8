"""Exception taxonomy shared by all sublap modules."""


class SublapError(Exception):
    """Base class for all library errors."""


class EvaluationError(SublapError):
    """A field, density or test function returned a non-finite value.

    Carries the chart point and the offending coordinate index so the
    failure is locatable.
    """

    def __init__(self, message, point=None, coordinate=None):
        self.point = point
        self.coordinate = coordinate
        if coordinate is not None:
            message = f"{message} (coordinate {coordinate}, point {point})"
        super().__init__(message)


class DegenerateFrameError(SublapError):
    """The frame matrix is singular (or numerically so) at a chart point."""


class IntegrationError(SublapError):
    """An ODE trajectory left the chart or went non-finite.

    ``t_fail`` is the integration time at which the failure was detected.
    """

    def __init__(self, message, t_fail=None):
        self.t_fail = t_fail
        if t_fail is not None:
            message = f"{message} (at integration time t={t_fail:g})"
        super().__init__(message)


class InvalidVolumeError(SublapError):
    """A volume density is non-positive at a sampled point."""


class NotContactError(SublapError):
    """The transverse endomorphism is degenerate where a contact structure
    was required."""


class StepTwoViolationError(SublapError):
    """d(eta) vanishes on the distribution, so the structure is not step 2."""


class QuasiReebUndefinedError(SublapError):
    """Eigenvalue crossing within the gap tolerance: the requested
    quasi-Reeb field is not well defined at this point."""


class InvalidSpecError(SublapError):
    """A nilpotent-algebra spec violates antisymmetry, grading or Jacobi."""


class InputError(SublapError):
    """Malformed user input (structure files, volume specs, CLI args)."""
