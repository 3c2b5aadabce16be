"""Terminal summary for the acceptance suite: one line per criterion."""

_acceptance_results = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance_results.append(
            (report.nodeid.split("::")[-1], report.passed, report.duration)
        )


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, passed, duration in _acceptance_results:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"  {status} {name} ({duration:.2f}s)")
