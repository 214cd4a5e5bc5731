"""Exception hierarchy shared by all modules."""


class CMCError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CMCError, ValueError):
    pass


class SingularEncounter(CMCError):
    """The profile reached one of the guard floors (f2 or f3^2) before t_end.

    ``which`` is ``"f2"`` or ``"f3"``; ``trajectory`` holds the accepted part
    of the integration up to ``t``.
    """

    def __init__(self, which, t, trajectory=None):
        super().__init__(f"profile hit the {which} floor at t={t:.12g}")
        self.which = which
        self.t = t
        self.trajectory = trajectory


class StepUnderflow(CMCError):
    def __init__(self, t, trajectory=None):
        super().__init__(f"step size underflow at t={t:.12g}")
        self.t = t
        self.trajectory = trajectory


class MaxStepsExceeded(CMCError):
    def __init__(self, t, trajectory=None):
        super().__init__(f"maximum number of steps exceeded at t={t:.12g}")
        self.t = t
        self.trajectory = trajectory


class OutOfRange(CMCError, ValueError):
    pass


class IllConditioned(CMCError):
    pass


class NoConvergence(CMCError):
    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


class LeftDomain(CMCError):
    pass


class SeedInvalid(CMCError):
    pass


class StallAtDsMin(CMCError):
    pass


class NotBracketed(CMCError, ValueError):
    pass


class NotClosable(CMCError, ValueError):
    pass
