import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from drift_pqc.cli import data_path  # noqa: E402
from drift_pqc.device import load_device, load_series  # noqa: E402


@pytest.fixture(scope="session")
def device():
    return load_device(data_path("ibmqx4.json"))


@pytest.fixture(scope="session")
def series(device):
    return load_series(data_path("synthetic_43day.csv"), device)


# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
