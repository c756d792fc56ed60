"""Exception hierarchy shared by all sdrenet modules."""


class SdreNetError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(SdreNetError, ValueError):
    pass


class InvalidConfig(SdreNetError, ValueError):
    pass


class NotStabilizable(SdreNetError):
    """No stabilizing solution of the Riccati equation exists (numerically)."""

    def __init__(self, msg, x=None):
        super().__init__(msg)
        self.x = x


class NoConvergence(SdreNetError):
    pass


class SingularSylvester(SdreNetError):
    pass


class InvalidBase(SdreNetError, ValueError):
    pass


class InvalidBounds(SdreNetError, ValueError):
    pass


class EmptyDataset(SdreNetError, ValueError):
    pass


class FormatError(SdreNetError):
    pass


class EmptyBatch(SdreNetError, ValueError):
    pass


class DegenerateTargets(SdreNetError, ValueError):
    pass


class NonFiniteLoss(SdreNetError):
    def __init__(self, msg, epoch=None):
        super().__init__(msg)
        self.epoch = epoch


class NonFiniteState(SdreNetError):
    """Integration produced a non-finite or runaway state.

    ``time`` is the time at which the blow-up was detected and ``trajectory``
    holds the partial trajectory up to that point (when available).
    """

    def __init__(self, msg, time=None, trajectory=None):
        super().__init__(msg)
        self.time = time
        self.trajectory = trajectory
