"""Exception taxonomy shared across the package.

Three broad families matter to callers: configuration problems (rejected
before any numerics run), numerical failures (a solver or quadrature could
not deliver its contract), and I/O problems. The command line maps these to
exit codes 2, 3 and 4 respectively.
"""


class LayerlabError(Exception):
    """Base class for all package-specific errors."""


class ConfigInvalid(LayerlabError):
    """A config value is missing, malformed, or out of the documented domain."""


class IoError(LayerlabError):
    """Reading or writing an artifact failed."""


class NumericalError(LayerlabError):
    """Base class for failures of numerical contracts."""


class NotEvaluable(NumericalError):
    """A user-supplied callable returned non-finite values on the scan grid."""


class NonMonotone(NumericalError):
    """A quantity required to be monotone was not."""


class ProfileRangeTooShort(NumericalError):
    """The requested profile range ends before the tail regime is reached."""


class TailNotReached(NumericalError):
    """Tail asymptotics were requested at points outside the tail regime."""


class ExtrapolationUnstable(NumericalError):
    """Richardson tail estimates disagree beyond the accepted spread."""


class EpsTooLarge(NumericalError):
    """The truncation window for the requested eps does not fit the profile."""


class BlowDown(NumericalError):
    """Radial integration of the Liouville equation failed to continue."""


class NewtonDiverged(NumericalError):
    """Damped Newton ran out of line-search budget."""


class MaxIterExceeded(NumericalError):
    """An iteration hit its cap before meeting its tolerance."""


class NoConvergence(NumericalError):
    """A fixed-point or projection iteration failed to converge."""


class OrderingViolated(NumericalError):
    """Components that must stay strictly ordered crossed."""


class SeparationTooSmall(NumericalError):
    """Requested interface separation is below the supported range."""


class NonGraphLevelSet(NumericalError):
    """A level set could not be represented as vertical graphs."""


class FoldOver(NumericalError):
    """Normal coordinates are not injective at the requested band width."""


class BandExceeded(NumericalError):
    """A query left the tubular band where normal coordinates are valid."""


class LinearSolveFailure(NumericalError):
    """An inner linear solve broke down or stalled."""


class IllConditionedFit(NumericalError):
    """A least-squares fit was requested on degenerate data."""
