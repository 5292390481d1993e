import sys
from pathlib import Path

import numpy as np
import pytest

# flat layout: modules live at the repository root
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from utils.gauge import circle_spec, ellipse_spec, linear_image_spec, make_gauge, superellipse_spec  # noqa: E402


@pytest.fixture(scope="session")
def circle():
    return make_gauge(circle_spec(2))


@pytest.fixture(scope="session")
def sphere():
    return make_gauge(circle_spec(3))


@pytest.fixture(scope="session")
def ellipse():
    """φ(ξ) = |Xξ| with X = diag(1/2, 1)."""
    return make_gauge(ellipse_spec(2.0, 1.0))


@pytest.fixture(scope="session")
def quartic():
    return make_gauge(superellipse_spec(4))


@pytest.fixture(scope="session")
def sextic():
    return make_gauge(superellipse_spec(6))


@pytest.fixture(scope="session")
def tilted_quartic():
    """Superellipse(4) under a shear, so no flat direction sits on an axis."""
    return make_gauge(linear_image_spec(superellipse_spec(4), np.array([[1.0, 0.3], [0.0, 1.2]])))
