import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qli.scenario import Scenario, calibrate  # noqa: E402


@pytest.fixture(scope="session")
def calibration():
    return calibrate(Scenario())


@pytest.fixture(scope="session")
def calibrated(calibration):
    """Default 20 km scenario with the published anchors fitted, no classical traffic."""
    return calibration.apply(Scenario())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda x: int(x.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
