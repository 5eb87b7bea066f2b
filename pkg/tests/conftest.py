import pytest

_VERDICTS: dict[int, tuple[bool, str]] = {}


class Criterion:
    """Records one acceptance verdict, prints it, then asserts it."""

    def __init__(self, number: int):
        self.number = number

    def __call__(self, passed: bool, detail: str):
        _VERDICTS[self.number] = (bool(passed), detail)
        print(f"\n{_line(self.number, passed, detail)}")
        assert passed, detail


def _line(number, passed, detail):
    return f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {detail}"


@pytest.fixture
def criterion(request):
    return Criterion(request.node.get_closest_marker("criterion").args[0])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        terminalreporter.write_line(_line(number, *_VERDICTS[number]))
