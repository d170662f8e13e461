import dataclasses

import pytest
from hypothesis import settings

from sgosc.config import resolve

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def registry():
    """Registry scenario with optional field replacements."""

    def get(name, **changes):
        scenario = resolve(name)
        return dataclasses.replace(scenario, **changes) if changes else scenario

    return get


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
