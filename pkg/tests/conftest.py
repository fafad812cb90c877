_LABELS = {}
_OUTCOMES = {}


def pytest_itemcollected(item):
    if item.nodeid.split("::")[0].endswith("test_acceptance.py"):
        doc = getattr(item.function, "__doc__", None) or item.name
        _LABELS[item.nodeid] = doc.strip().splitlines()[0]


def pytest_runtest_logreport(report):
    if report.nodeid not in _LABELS:
        return
    if report.failed:
        _OUTCOMES[report.nodeid] = "FAIL"
    elif report.when == "call" and report.nodeid not in _OUTCOMES:
        _OUTCOMES[report.nodeid] = "SKIP" if report.skipped else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid, label in _LABELS.items():
        if nodeid in _OUTCOMES:
            terminalreporter.write_line(f"{_OUTCOMES[nodeid]}  {label}")
