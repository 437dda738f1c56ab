import sys
from pathlib import Path

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from core.exponent_model import ConstantExponent, LogExponent, build_spiked_exponent  # noqa: E402


@pytest.fixture
def square():
    return ConstantExponent(2.0)


@pytest.fixture
def log_exponent():
    return LogExponent()


@pytest.fixture
def spiked():
    return build_spiked_exponent(10, 4, 2)
