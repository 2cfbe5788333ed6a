"""Error taxonomy shared across the package.

Three families map onto the CLI exit codes: configuration problems (exit 2),
numerical breakdowns inside an otherwise valid computation (exit 3), and
mathematical hypotheses that the data refuses to satisfy (exit 4).
"""


class ConfigError(ValueError):
    """Invalid or contradictory run configuration."""


class NumericError(RuntimeError):
    """A numerical routine could not produce a trustworthy result."""


class HypothesisError(RuntimeError):
    """A mathematical precondition failed on the supplied data."""


class PrecisionExhausted(NumericError):
    """Continued-fraction expansion ran past the working precision."""


class DegenerateLeadingCoefficient(ConfigError):
    """Top Fourier coefficient of the potential vanishes."""


class NearSingular(NumericError):
    """Matrix solve requested with condition number beyond the trust bound."""


class SingularInverse(NumericError):
    """Backward cocycle product hit a numerically singular factor."""


class ZeroDenominator(NumericError):
    """Ratio check requested at a parameter where the denominator vanishes."""


class IndexOutOfRange(ConfigError):
    """Row or column set leaves the admissible index window."""


class ZeroHit(NumericError):
    """Determinant evaluated exactly on a zero of the section."""


class ResonantDivisor(NumericError):
    """A small-divisor denominator fell below the safe floor."""

    def __init__(self, modes, floor):
        self.modes = list(modes)
        self.floor = floor
        super().__init__(f"divisor below {floor:g} at modes {self.modes}")


class NotSubcritical(HypothesisError):
    """Lyapunov exponent on the real axis is not numerically zero."""


class NonAffineWarning(UserWarning):
    """Lyapunov-vs-strip-height data departs from an affine law on the grid."""


class EmptyMaskWarning(UserWarning):
    """Resonance masking left no usable window at the current scale."""


class VectorVanishes(HypothesisError):
    """Analytic vector dips below the invertibility floor on the strip."""


class DeterminantVanishes(HypothesisError):
    """Wronskian-type determinant vanishes where a realification needs it."""


class NoEigenvalueWithin(HypothesisError):
    """Banded eigensolve found nothing near the requested energy."""
