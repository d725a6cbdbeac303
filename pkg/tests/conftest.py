#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Shared fixtures; puts py/ on the import path like the entry scripts."""

import os
import sys

import pytest

PY_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(
    __file__))), 'py')
if PY_DIR not in sys.path:
    sys.path.insert(0, PY_DIR)

import core  # noqa: E402
import sphere  # noqa: E402


@pytest.fixture
def rng():
    return sphere.SeededRng(12345)


@pytest.fixture
def np_rng():
    import numpy as np
    return np.random.default_rng(2024)


@pytest.fixture
def case_1a_spectrum():
    """Three unstable eigenvalues with every target fraction positive."""
    return core.GainSpectrum([1.2, 1.3, 1.4])


@pytest.fixture
def case_2_spectrum():
    """Two unstable eigenvalues (r = 0.878) followed by two stable ones."""
    return core.GainSpectrum([1.2, 1.5, 0.5, 0.5])
