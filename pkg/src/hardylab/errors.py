"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input fails a documented precondition."""


class ScenarioError(ValidationError):
    """Party count or measurement scenario out of supported range."""


class DegenerateMeasurementError(ValidationError):
    """Measurement pair is commuting/degenerate (|alpha| is 0 or 1)."""


class SizeError(ValidationError):
    """Problem dimensions exceed the supported desk scale."""


class CapabilityError(ValidationError):
    """Requested relaxation level cannot express the required moments."""


class NumericError(RuntimeError):
    """Iteration failed to converge or numerical quality was lost."""


class HypothesisUnmetError(RuntimeError):
    """Observed statistics do not satisfy the near-optimal Hardy point
    required by the certification theorem."""
