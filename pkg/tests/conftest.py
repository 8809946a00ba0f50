import pytest

from cimf import load_demo


@pytest.fixture(scope="session")
def demo():
    """The bundled 4-movie corpus: (ratings, space)."""
    ratings, space, _stats = load_demo()
    return ratings, space
