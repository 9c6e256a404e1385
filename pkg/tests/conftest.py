import pytest

from lamnrisk import harness as H


@pytest.fixture(scope="session")
def gw_check_report():
    """Risk report for GW, theta0 = 2, n = 30, Check(4,1) truncated at 50, 1e5 paths.

    Shared by the dominance, bound, sweep and reproducibility tests.
    """
    cfg = H.RiskConfig(seed=20240611, sweep=tuple(range(9)), workers=1)
    return cfg, H.run_risk(cfg)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
