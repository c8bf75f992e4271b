import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pavoc.config import DEFAULT_BETAS
from pavoc.diffusion import schedule_from_betas
from pavoc.dsp import StftConfig, build_mel_filterbank


@pytest.fixture(scope="session")
def stft_config():
    """The 22.05 kHz vocoder setup: n_fft 2048, Hann 1200, hop 300."""
    return StftConfig()


@pytest.fixture(scope="session")
def fb128(stft_config):
    return build_mel_filterbank(128, stft_config)


@pytest.fixture(scope="session")
def wg6_schedule():
    return schedule_from_betas(DEFAULT_BETAS)
