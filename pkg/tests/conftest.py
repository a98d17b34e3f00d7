from pathlib import Path

import pytest

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test decides")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        _CRITERIA[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")
        if detail:
            terminalreporter.write_line(f"               {detail}")
    passed = sum(1 for _, s, _ in _CRITERIA.values() if s == "PASS")
    terminalreporter.write_line(f"{passed}/{len(_CRITERIA)} acceptance criteria passed")


@pytest.fixture
def demo_dir() -> Path:
    return Path(__file__).resolve().parent.parent / "demo"
