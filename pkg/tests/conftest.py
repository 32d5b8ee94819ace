import pytest

_LOG = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LOG] = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Lines of the form ``PASS  #n  ...`` collected for the terminal summary."""
    return request.config.stash[_LOG]


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LOG, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("#")[1].split()[0])):
            terminalreporter.write_line(line)
