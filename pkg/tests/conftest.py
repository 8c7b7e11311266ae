import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line and fail the test if any named check failed."""
    lines = request.config.stash[_LINES]

    def record(number, title, checks, details):
        failed = [name for name, ok in checks.items() if not ok]
        verdict = "FAIL" if failed else "PASS"
        line = f"criterion {number} {verdict}: {title} | {details}"
        if failed:
            line += f" | failed: {', '.join(failed)}"
        lines.append(line)
        print(line)
        assert not failed, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
