import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import pmdpcert as pc


@pytest.fixture(scope="session")
def open3():
    return pc.GridScenario(3, 3, uav_start=(0, 0), robot_start=(2, 2), goal=(2, 0))


@pytest.fixture(scope="session")
def open5():
    return pc.reference_open()


@pytest.fixture(scope="session")
def rooftop3():
    return pc.GridScenario(
        3, 3, uav_start=(1, 1), robot_start=(0, 0), goal=(1, 0),
        context=pc.Context.ROOFTOP,
        rooftops=frozenset({(1, 1), (1, 2)}),
        rooftop_edges=frozenset({frozenset({(1, 1), (1, 2)})}),
    )


@pytest.fixture(scope="session")
def rooftop5():
    return pc.reference_rooftop()


@pytest.fixture(scope="session")
def open3_model(open3):
    return pc.build_open(open3)


@pytest.fixture(scope="session")
def open5_model(open5):
    return pc.build_open(open5)


@pytest.fixture(scope="session")
def rooftop3_model(rooftop3):
    return pc.build_rooftop(rooftop3)


@pytest.fixture(scope="session")
def rooftop5_model(rooftop5):
    return pc.build_rooftop(rooftop5)


@pytest.fixture(scope="session")
def prop():
    return pc.UntilProperty("crash", "goal")
