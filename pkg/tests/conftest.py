import pytest

_ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.fixture
def criterion(request):
    """Record a one-line summary for an acceptance criterion: ``criterion("detail")``."""
    detail = []
    request.node.acceptance_detail = detail
    return detail.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    detail = "; ".join(getattr(item, "acceptance_detail", []))
    _ACCEPTANCE.append((marker.args[0], "PASS" if report.passed else "FAIL", detail))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): end-to-end acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{status} {label}" + (f" ({detail})" if detail else ""))
