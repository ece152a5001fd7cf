import numpy as np
import pytest

from factorbt.panel import MonthStamp, Panel
from factorbt.synth import SynthSpec, generate


def grid(values, start="2000-01", stocks=None):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if stocks is None:
        stocks = [f"T{j:02d}" for j in range(values.shape[1])]
    return Panel(MonthStamp.parse(start), stocks, values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synth():
    """A quick cbm-planted dataset shared by the integration tests."""
    spec = SynthSpec(n_stocks=60, n_months=100, seed=3, missing_rate=0.02)
    return generate(spec)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
