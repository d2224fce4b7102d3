import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from optiloop import _kernels


@pytest.fixture(params=sorted(_kernels.BACKENDS))
def kernel_backend(request, monkeypatch):
    """Run kernel-sensitive tests against every built backend."""
    impl = _kernels.get_backend(request.param)
    monkeypatch.setattr(_kernels, "non_dominated_sort", impl.non_dominated_sort)
    monkeypatch.setattr(_kernels, "crowding_distance", impl.crowding_distance)
    monkeypatch.setattr(_kernels, "hypervolume_2d", impl.hypervolume_2d)
    monkeypatch.setattr(_kernels, "hypervolume_3d", impl.hypervolume_3d)
    return request.param
