import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixture_suite import build_suite  # noqa: E402


@pytest.fixture(scope="session")
def suite(tmp_path_factory):
    """The shared end-to-end corpus: tables, questions, replay transcript."""
    root = tmp_path_factory.mktemp("fixture-suite")
    return build_suite(root)


_CRITERION_PREFIX = "test_acceptance.py::test_criterion_"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if _CRITERION_PREFIX not in nodeid:
                continue
            name = nodeid.split("::", 1)[1]  # test_criterion_NN_slug[...]
            base = name.split("[", 1)[0]
            parts = base.replace("test_criterion_", "").split("_")
            number = int(parts[0])
            title = " ".join(parts[1:])
            ok = lines.get(number, (title, True))[1] and status == "passed"
            lines[number] = (title, ok)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        title, ok = lines[number]
        terminalreporter.write_line(
            f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'}"
        )
