import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        prev = _CRITERIA.get(n, (title, True, []))
        ok = prev[1] and rep.passed
        note = list(prev[2])
        detail = getattr(item, "criterion_detail", None)
        if detail:
            note.append(detail)
        _CRITERIA[n] = (title, ok, note)


@pytest.fixture
def record(request):
    """Attach a short measured-value note to the acceptance summary line."""
    def _rec(text):
        request.node.criterion_detail = text
    return _rec


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, notes = _CRITERIA[n]
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}"
        if notes:
            line += "  [" + "; ".join(notes) + "]"
        terminalreporter.write_line(line)


GHZ_SIZES = (20, 32, 44, 60, 80)
GHZ_NS = (1, 2, 4, 8)


@pytest.fixture(scope="session")
def ghz_surface():
    """The production GHZ surface (1, 2, lambda2: 2 -> 1), computed once per session."""
    from topocrit import adiabatic
    return adiabatic.ghz_scaling_surface(adiabatic.GhzProtocol(), GHZ_SIZES, GHZ_NS)
