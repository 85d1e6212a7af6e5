"""Collects the per-criterion verdicts of the acceptance suite and prints
them as one line each at the end of the run."""

import pytest

_VERDICTS: dict[int, tuple[bool, str]] = {}


class Verdict:
    def __init__(self, number: int):
        self.number = number

    def __call__(self, ok: bool, detail: str) -> None:
        _VERDICTS[self.number] = (bool(ok), detail)
        line = f"criterion {self.number}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(line)
        assert ok, line


@pytest.fixture
def verdict(request):
    number = request.node.get_closest_marker("criterion").args[0]
    return Verdict(number)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        ok, detail = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and report.when == "call" and report.failed and marker.args[0] not in _VERDICTS:
        reason = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
        _VERDICTS[marker.args[0]] = (False, f"error before verdict: {reason}")
