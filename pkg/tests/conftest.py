import pytest

_criteria: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and report.when == "call":
        title = (item.function.__doc__ or item.name).strip().splitlines()[0]
        detail = dict(item.user_properties).get("detail", "")
        _criteria.append(("PASS" if report.passed else "FAIL", title, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for verdict, title, detail in _criteria:
        terminalreporter.write_line(f"{verdict}  {title}" + (f"  [{detail}]" if detail else ""))
