class SFRError(Exception):
    """Base class for library errors."""


class ContractError(SFRError, ValueError):
    """An argument violates a documented precondition or type invariant."""


class OutOfHullError(ContractError):
    """A plane coordinate lies outside the hull of pixel centers."""


class DegenerateHeatmapError(ContractError):
    """A heatmap carries no mass."""


class UnsupportedJointError(SFRError, ValueError):
    """The heatmap support of a joint lies entirely off the hand."""


class DivergenceError(SFRError, RuntimeError):
    """Gradient descent blew up."""


class EmptyHandError(SFRError, ValueError):
    """Background removal left no pixels."""


class EmptyCropError(SFRError, ValueError):
    """No on-hand pixel falls inside the normalization cube."""
