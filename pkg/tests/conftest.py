import copy

import pytest
import yaml

from carriermix.config import DEFAULT_CONFIG, load_config, parse_config


@pytest.fixture(scope="session")
def base_raw():
    with open(DEFAULT_CONFIG) as fh:
        return yaml.safe_load(fh)


@pytest.fixture
def raw(base_raw):
    """Mutable copy of the bundled configuration as plain data."""
    return copy.deepcopy(base_raw)


@pytest.fixture(scope="session")
def base_config():
    return load_config(DEFAULT_CONFIG)


@pytest.fixture
def make_config(base_raw):
    def _make(**overrides):
        data = copy.deepcopy(base_raw)
        for dotted, value in overrides.items():
            node = data
            *path, last = dotted.split("__")
            for key in path:
                node = node[key]
            node[last] = value
        return parse_config(data)

    return _make


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data, sort_keys=False))
    return path


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
