"""Exception hierarchy.

``NufocusError`` is the common base; the CLI maps ``ConfigError`` to exit
code 1 and every ``NumericalError`` subclass to exit code 2.
"""


class NufocusError(Exception):
    """Base class for all package-specific errors."""

    tag = "error"


class ConfigError(NufocusError):
    """Invalid, missing, or unparseable configuration input."""

    tag = "config"


class NonpositiveFrequencyError(NufocusError):
    """Electron precession frequency fell at or below the guard threshold.

    Usually means the polarization window is too wide for the applied field.
    """

    tag = "nonpositive-frequency"


class NumericalError(NufocusError):
    """Base class for runtime numerical failures."""

    tag = "numerical"


class NonUnitaryError(NumericalError):
    """Pulse integration failed the unitarity/refinement tolerance."""

    tag = "non-unitary"


class NoExcitationError(NumericalError):
    """Pulse does not couple to any trion state; asymmetry undefined."""

    tag = "no-excitation"


class NonContractiveError(NumericalError):
    """Period map admits no bounded steady state."""

    tag = "non-contractive"


class MisalignedTablesError(NumericalError):
    """Per-frequency tables do not share the polarization grid."""

    tag = "misaligned-tables"


class ZeroRateError(NumericalError):
    """A flip rate required by the stationary solve is not positive."""

    tag = "zero-rate"


class UnstableStepError(NumericalError):
    """Explicit master-equation step exceeds the stability bound."""

    tag = "unstable-step"


class EmptyInputError(NufocusError):
    """An input table contains no rows."""

    tag = "empty-input"
