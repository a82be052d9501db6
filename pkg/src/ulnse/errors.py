"""Exception types raised across the package."""


class IllPosedInversionError(ValueError):
    """Inverse Laplacian or Biot-Savart requested for a field with nonzero mean."""


class NotDivergenceFreeError(ValueError):
    pass


class SupportError(ValueError):
    """A compact-support or ball-fit precondition is violated."""


class BoxTooSmallError(ValueError):
    """The periodic box cannot represent the requested whole-space quantity."""


class SolverBlowupError(RuntimeError):
    def __init__(self, step, t, umax):
        self.step = step
        self.t = t
        self.umax = umax
        super().__init__(
            f"non-finite state at step {step} (t={t:.6g}); max|u| before failure was {umax:.6g}"
        )


class ConfigError(ValueError):
    pass


class ManifestError(RuntimeError):
    pass
