"""Exception and warning types shared across the package."""


class SpikeShardError(Exception):
    """Base class for all errors raised by this package."""


class InvalidRatio(SpikeShardError, ValueError):
    """Aspect ratio p/n outside the supported open interval (0, 1)."""


class SpikeInsideBulk(SpikeShardError, ValueError):
    """A population eigenvalue lies inside the bulk interval and is not a spike."""


class NotSpiked(SpikeShardError, ValueError):
    """A sample eigenvalue sits inside the bulk support, so no spike can be recovered."""


class DegenerateVariance(SpikeShardError, ValueError):
    """The asymptotic variance formula degenerates because (alpha - 1)^2 <= y."""


class InvalidShape(SpikeShardError, ValueError):
    """A data matrix violates a shape requirement (typically n <= p)."""


class InvalidRule(SpikeShardError, ValueError):
    """A partition rule is unusable, e.g. a size multiplier not above 1."""


class NoConvergence(SpikeShardError, RuntimeError):
    """The underlying eigensolver failed to converge."""


class RepeatedEigenvalues(SpikeShardError, ValueError):
    """Adjacent eigenvalues coincide within tolerance; secular roots are undefined."""


class WhiteningUnavailable(SpikeShardError, ValueError):
    """Empirical moment estimation requested without raw entries or a known root."""


class NoValidReports(SpikeShardError, ValueError):
    """Every worker report was excluded; nothing left to aggregate."""


class EmptyInput(SpikeShardError, ValueError):
    """An aggregation routine received an empty sequence."""


class LengthMismatch(SpikeShardError, ValueError):
    """Two parallel sequences (reports and weights) differ in length."""


class NonFiniteField(SpikeShardError, ValueError):
    """A message marked ok carries a NaN or infinite numeric field."""


class ParseError(SpikeShardError, ValueError):
    """A wire line is not a well-formed JSON object."""


class SchemaError(SpikeShardError, ValueError):
    """A wire message has missing, extra, or ill-typed fields."""


class MalformedCsv(SpikeShardError, ValueError):
    """A CSV body is ragged or otherwise not rectangular."""


class NonNumericCell(SpikeShardError, ValueError):
    """A CSV cell could not be parsed as a finite number."""


class EmptyFile(SpikeShardError, ValueError):
    """A CSV file contains no data rows."""


class TooManyMachines(SpikeShardError, ValueError):
    """A requested split would leave some shard with n <= p."""


class FallbackWarning(UserWarning):
    """Degenerate weights were replaced by the uniform fallback."""


class ExcludedWorkerWarning(UserWarning):
    """A worker report was excluded from aggregation."""
