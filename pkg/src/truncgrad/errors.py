"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent truncation or run configuration (e.g. ``K`` not inside ``A``)."""


class ModelError(ValueError):
    """The model produced an invalid transition row or rate."""


class SolverError(RuntimeError):
    """``I - G_kk`` is singular or the solve is numerically unreliable."""


class HypothesisError(RuntimeError):
    """A hypothesis of the error bounds does not hold; no enclosure is emitted."""


class HypothesisFailure(HypothesisError):
    """The contraction needed for the a posteriori bounds is not below one."""

    def __init__(self, contraction: float, message: str | None = None):
        self.contraction = contraction
        super().__init__(
            message
            or f"contraction {contraction:.6g} >= 1; enlarge the truncation set"
        )


class DriftViolation(HypothesisError):
    """A Lyapunov inequality fails at a checked state."""

    def __init__(self, inequality: str, state, margin: float):
        self.inequality = inequality
        self.state = state
        self.margin = margin
        super().__init__(
            f"drift inequality {inequality!r} violated at state {state}: "
            f"margin {margin:.6g} < 0"
        )


class UncertifiedDrift(HypothesisError):
    """Drift inequalities were not certified beyond the checked region."""
