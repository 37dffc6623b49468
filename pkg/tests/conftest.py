import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from webteleop.description import load_robot_description


@pytest.fixture(scope="session")
def desc():
    return load_robot_description()
