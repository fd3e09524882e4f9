import numpy as np
import pytest

from isgraph.channel import BoundedPowerLaw, ChannelParams, UnboundedPowerLaw


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=[UnboundedPowerLaw(4.0), BoundedPowerLaw(4.0), UnboundedPowerLaw(2.5),
                        BoundedPowerLaw(2.0)], ids=repr)
def model(request):
    return request.param


@pytest.fixture
def params10():
    return ChannelParams(snr0=10.0, rho=0.0)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
