from hypothesis import settings

# the first call into a compiled kernel loads it from the numba cache
settings.register_profile("default", deadline=None)
settings.load_profile("default")

_criteria: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    number, title = mark.args
    outcome = "PASS" if call.excinfo is None else "FAIL"
    detail = getattr(item, "criterion_detail", "")
    if call.excinfo is not None:
        detail = str(call.excinfo.value).splitlines()[0][:160] if str(call.excinfo.value) else call.excinfo.typename
    _criteria[number] = (outcome, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        outcome, title, detail = _criteria[number]
        line = f"criterion {number}: {outcome}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
