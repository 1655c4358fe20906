import pytest

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        prev = _ACCEPTANCE.get(number)
        if prev is None or failed:
            _ACCEPTANCE[number] = (title, "FAIL" if failed else "PASS", dict(report.user_properties))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, props = _ACCEPTANCE[number]
        detail = ", ".join(f"{k}={v}" for k, v in props.items())
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title}" + (f" [{detail}]" if detail else ""))
