"""Kernel backend selection.

The Pareto arithmetic (non-dominated sorting, crowding, exact hypervolume)
sits in the solver's inner loop, so a Cython build is preferred; a pure
NumPy twin with the same contract is the fallback. Set
``OPTILOOP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import pure

BACKENDS = {"pure": pure}

try:
    from . import _pareto_cy

    BACKENDS["cython"] = _pareto_cy
except ImportError:  # extension not built
    _pareto_cy = None

if os.environ.get("OPTILOOP_PURE_PYTHON"):
    ACTIVE_BACKEND = "pure"
else:
    ACTIVE_BACKEND = "cython" if _pareto_cy is not None else "pure"

_impl = BACKENDS[ACTIVE_BACKEND]

non_dominated_sort = _impl.non_dominated_sort
crowding_distance = _impl.crowding_distance
hypervolume_2d = _impl.hypervolume_2d
hypervolume_3d = _impl.hypervolume_3d


def get_backend(name: str):
    """Return a specific backend module ("pure" or "cython")."""
    if name not in BACKENDS:
        raise KeyError(f"unknown kernel backend {name!r} (built: {sorted(BACKENDS)})")
    return BACKENDS[name]
