import pytest

_outcomes: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.failed:
        _outcomes[n] = ("FAIL", title)
    elif rep.when == "call" and n not in _outcomes:
        _outcomes[n] = ("PASS", title)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance")
    for n in sorted(_outcomes):
        status, title = _outcomes[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")
