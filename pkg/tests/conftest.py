import sys
from pathlib import Path

import pytest

from embedopt import backend

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable


@pytest.fixture(params=backend.available_backends())
def each_backend(request):
    """Run a test once per available kernel backend."""
    previous = backend.set_backend(request.param)
    yield request.param
    backend.set_backend(previous)
