"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto
1 (usage), 2 (data) or 3 (numerical) without a lookup table.
"""


class KftpError(ValueError):
    exit_code = 2


class UsageError(KftpError):
    exit_code = 1


class DataError(KftpError):
    exit_code = 2


class NumericalError(KftpError):
    exit_code = 3


# trace_io
class MissingColumnError(DataError):
    pass


class NonUniformSamplingError(DataError):
    pass


class EmptyTraceError(DataError):
    pass


class TraceTooShortError(DataError):
    pass


class DegenerateRangeError(NumericalError):
    pass


# preprocess
class EvenWindowError(UsageError):
    pass


class WindowTooLargeError(UsageError):
    pass


class ZeroVarianceError(NumericalError):
    pass


# mlr / kalman
class RankDeficientError(NumericalError):
    pass


class TooFewRowsError(DataError):
    pass


class FeatureMismatchError(DataError):
    pass


class InvalidLeadError(UsageError):
    pass


# predictors
class NonPositiveThroughputError(DataError):
    pass


class InvalidAlphaError(UsageError):
    pass


class EmptyHistoryError(DataError):
    pass


class UnknownPredictorError(UsageError):
    pass


# metrics
class LengthMismatchError(DataError):
    pass


class NonPositiveBaselineError(NumericalError):
    pass


class NonPositiveInputError(UsageError):
    pass


# simulators
class BelowMinimumError(DataError):
    pass


class EmptyHorizonError(UsageError):
    pass


class ConfigError(UsageError):
    pass
