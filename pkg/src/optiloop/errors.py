"""Exception hierarchy shared across the package."""


class OptiloopError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(OptiloopError):
    """Input violates a documented invariant (bad problem, design, config...)."""


class EncodingError(ValidationError):
    """A design value cannot be encoded (out of bounds, unknown category)."""


class DimensionError(ValidationError):
    """Vector length does not match the expected dimension."""


class ConstraintEvaluationError(OptiloopError):
    """A blackbox constraint program failed; feasibility is undeterminable."""


class InsufficientDataError(OptiloopError):
    """Too few observations to fit a model."""


class ConditioningError(OptiloopError):
    """Kernel matrix factorization failed even after jitter escalation."""


class SolverFailure(OptiloopError):
    """The inner solver could not produce any feasible candidate."""


class InfeasibleSpaceError(OptiloopError):
    """Could not sample the requested number of feasible designs."""


class StoreError(OptiloopError):
    """Experiment database failure (conflict, unknown id, integrity)."""


class IllegalTransition(StoreError):
    """Requested record status change is not allowed by the lifecycle."""


class SchemaVersionError(StoreError):
    """Archive schema version does not match this build."""


class SchedulerError(OptiloopError):
    """Evaluation loop aborted (repeated suggestion failures, bad binding)."""


class EvaluatorConfigError(SchedulerError):
    """Evaluation program missing or not executable."""
