"""
Exception and warning types shared by the library and the command line.

Anything that is the caller's fault (bad input, bad config, unusable
hyperparameters) derives from ValueError so the CLI can map it to exit code 2.
"""


class FalqonError(Exception):
    pass


class InputError(FalqonError, ValueError):
    pass


class ConfigError(InputError):
    pass


class InfeasibleProblemError(InputError):
    pass


class UnsupportedSizeError(InputError):
    pass


class InvalidHyperparameterError(InputError):
    pass


class NotDiagonalError(InputError):
    pass


class FsInapplicableError(InputError):
    pass


class QubitCapError(FalqonError):
    pass


class UndefinedMetricError(FalqonError, ValueError):
    pass


class TuningFailureError(FalqonError):
    pass


class NonConvergenceError(FalqonError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


class InstanceError(FalqonError):
    def __init__(self, index, cause):
        super().__init__(f'instance {index}: {type(cause).__name__}: {cause}')
        self.index = index
        self.cause = cause

    def __reduce__(self):
        return (type(self), (self.index, self.cause))


class FsInapplicableWarning(UserWarning):
    pass


class DuplicateInvalidConfigWarning(UserWarning):
    pass
