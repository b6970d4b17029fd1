import math

import pytest

from eitlab.params import mhz, apparatus_defaults

TWO_PI = 2 * math.pi


@pytest.fixture
def apparatus():
    return apparatus_defaults()


@pytest.fixture
def eit_params():
    """Smaller crystal with the fitted control field."""
    return apparatus_defaults(g_n=mhz(13.6), omega_c=mhz(4.1))
