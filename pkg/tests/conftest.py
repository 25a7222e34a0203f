import numpy as np
import pytest

from grapecount import _accel, _kernels
from grapecount.geometry import CameraIntrinsics

BACKENDS = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])


@pytest.fixture
def k500():
    # integer principal point so pixel centers line up with the optical axis
    return CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)


@pytest.fixture
def kinect():
    return CameraIntrinsics.kinect()


@pytest.fixture(params=BACKENDS)
def register_kernel(request):
    return getattr(_kernels, f"register_depth_{request.param}")


@pytest.fixture(params=BACKENDS)
def paint_kernel(request):
    return getattr(_kernels, f"paint_discs_{request.param}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
