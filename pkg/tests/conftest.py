import pytest

from bailpipe.config import PatternConfig


@pytest.fixture(scope="session")
def patterns() -> PatternConfig:
    return PatternConfig.load()
