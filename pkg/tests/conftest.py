import pytest

_CRITERIA: dict[int, list[bool]] = {}
_TITLES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k, title): acceptance criterion number k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    k = mark.args[0]
    _TITLES[k] = mark.args[1]
    _CRITERIA.setdefault(k, []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        status = "PASS" if all(_CRITERIA[k]) else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {status}  {_TITLES[k]}")
