import pytest

from teleamp.protocol import default_certificate


@pytest.fixture(scope="session")
def certificate():
    return default_certificate()
