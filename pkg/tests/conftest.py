import pytest

from netdesign.scenarios import materialize


@pytest.fixture(scope="session")
def pigou():
    return materialize("pigou")


@pytest.fixture(scope="session")
def braess_with():
    return materialize("braess", {"with_edge": True})


@pytest.fixture(scope="session")
def braess_without():
    return materialize("braess", {"with_edge": False})


@pytest.fixture(scope="session")
def counterexample_mc():
    return materialize("counterexample", {"costing": "mc"})


@pytest.fixture(scope="session")
def counterexample_gs():
    return materialize("counterexample", {"costing": "greenshields"})


@pytest.fixture(scope="session")
def fig3():
    return materialize("fig3")


@pytest.fixture(scope="session")
def fig4():
    return materialize("fig4")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion, printed after the run."""
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            location = getattr(report, "location", None)
            if not location or "test_acceptance" not in location[0]:
                continue
            name = location[2]
            verdict = "PASS" if status == "passed" else "FAIL"
            lines.append((name, verdict))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in sorted(lines):
        terminalreporter.write_line(f"{verdict}  {name}")
