import pytest

from caccsim.config import bundled_path, parse_scenario


@pytest.fixture
def scenario():
    def load(name):
        return parse_scenario(bundled_path(name))
    return load
