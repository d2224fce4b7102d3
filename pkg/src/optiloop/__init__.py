"""optiloop: multi-objective Bayesian experiment design.

Suggests which expensive experiments to run next: Gaussian process
surrogates over an encoded design space, acquisition functions, an
evolutionary inner solver and batch selection, wired to a persistent
experiment database, a sync/async evaluation scheduler, an HTTP service
and a CLI.
"""

from .errors import OptiloopError
from .optimizer import RunConfig, SuggestionBatch, initial_designs, suggest
from .problem import Design, Problem, decode, encode, load_problem, validate
from .store import ExperimentStore

__version__ = "0.1.0"

__all__ = [
    "Design",
    "ExperimentStore",
    "OptiloopError",
    "Problem",
    "RunConfig",
    "SuggestionBatch",
    "decode",
    "encode",
    "initial_designs",
    "load_problem",
    "suggest",
    "validate",
    "__version__",
]
