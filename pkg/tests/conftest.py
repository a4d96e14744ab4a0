import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []

REFERENCE_RHO = np.array([[1, 0.767, 0.759], [0.767, 1, 0.624], [0.759, 0.624, 1]])
GUMBEL_THETA2_XI = float(np.log(3) / np.log(2))


@pytest.fixture
def record_criterion():
    """Record a one-line PASS/FAIL verdict for the terminal summary."""

    def _record(tag: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
