import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    A test that errors before recording still gets a FAIL line.
    """
    recorded = []

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} [{number}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        recorded.append(line)
        print(line)
        return ok

    yield record
    if not recorded:
        ACCEPTANCE_LINES.append(f"FAIL [{request.node.name}] raised before reporting")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: s.split("]")[0].split("[")[1].zfill(3)):
            terminalreporter.write_line(line)
