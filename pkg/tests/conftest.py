import pytest

from macsim.kernel import Kernel


# Fixtures
@pytest.fixture
def kernel():
    """Fixture providing a fresh kernel with master seed 7."""
    return Kernel(7)
