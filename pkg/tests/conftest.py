import pytest

from ulpsim import swcap
from ulpsim.devices import Environment

# thermal voltage at 300 K written out by hand, independent of the package
VT_300 = 1.380649e-23 * 300.0 / 1.602176634e-19


@pytest.fixture(scope="session")
def room():
    return Environment(300.0)


@pytest.fixture(scope="session")
def calibrated_180():
    return swcap.SWCAP_PRESETS["180nm"].calibrated_device()
