import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from energysimo.model import SystemParams  # noqa: E402


@pytest.fixture
def m2_example():
    """p = [0, 2], sigma_z2 = 1, N = 100, K = 0."""
    return SystemParams(K=0, N=100, sigma_z2=1.0, M=2, p_bar=1.0)


@pytest.fixture
def desk_params():
    """M = 4, N = 500, K = 50, SNR = 0 dB."""
    return SystemParams.from_snr_db(K=50, N=500, M=4, snr_db=0.0)
