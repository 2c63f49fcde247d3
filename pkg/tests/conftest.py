import sys
from pathlib import Path

import numpy as np
import pytest

from msrbounds.geometry import build_layout
from msrbounds.radar_link import LfmPulseTrain, LinkBudget

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def grid25():
    return build_layout(25, 500.0, 10.0)


@pytest.fixture
def waveform():
    return LfmPulseTrain()


@pytest.fixture
def budget():
    return LinkBudget()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n=2, spread=6.0):
    """Random SPD matrix with eigenvalues spanning ``spread`` decades."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = 10.0 ** rng.uniform(-spread / 2, spread / 2, size=n)
    return (Q * w) @ Q.T


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
