import pytest
from hypothesis import settings

import helpers

settings.register_profile("ci", max_examples=200, deadline=None)
settings.register_profile("dev", max_examples=50, deadline=None)
settings.load_profile("dev")


@pytest.fixture
def flu_rules():
    return helpers.flu_rules()


@pytest.fixture
def flu_pop():
    return helpers.flu_pop()


def pytest_terminal_summary(terminalreporter):
    if not helpers.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in helpers.ACCEPTANCE:
        terminalreporter.write_line(line)
