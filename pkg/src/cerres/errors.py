"""Exception types shared across the package."""


class CerresError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(CerresError):
    pass


class NonFiniteInputError(CerresError):
    pass


class InvalidDimensionError(CerresError):
    pass


class InvalidJointError(CerresError):
    pass


class TooShortRolloutError(CerresError):
    pass


class EmptyReferenceError(CerresError):
    pass


class EmptyEpisodeError(CerresError):
    pass


class SingularSystemError(CerresError):
    pass


class MissingBaselineError(CerresError):
    """Soft gating requested without a calibrated nominal reward baseline."""


class ConfigError(CerresError):
    pass


class NumericalDivergenceError(CerresError):
    """Closed-loop state became non-finite; carries step diagnostics."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class MissingArtifactError(CerresError):
    pass


class CrossSeverityError(CerresError):
    """Adapter evaluated on a fault cell it was not consolidated for."""
