import os

import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running checks (minutes)")
    config.addinivalue_line(
        "markers",
        "acceptance: end-to-end acceptance criteria (run by default; the "
        "heaviest variants upgrade when TRIOSC_FULL_ACCEPTANCE=1)",
    )


def full_acceptance() -> bool:
    return os.environ.get("TRIOSC_FULL_ACCEPTANCE", "") not in ("", "0")
