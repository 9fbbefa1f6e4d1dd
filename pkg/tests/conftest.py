import numpy as np
import pytest

from retirement_eval.did import DesignSpec, OutcomePanel
from retirement_eval.fixtures import calibrated_panel, noiseless_panel, scenarios


@pytest.fixture(scope="session")
def noiseless():
    return noiseless_panel()


@pytest.fixture(scope="session")
def calibrated():
    return calibrated_panel()


@pytest.fixture(scope="session")
def bundled_scenarios():
    return scenarios()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cam_spec():
    return DesignSpec("CAM", policy_year=2012, base_year=2012)


def make_panel(values, years=None, units=None, student_fte=None):
    """Wrap a units x years array as an OutcomePanel; unit 0 is called T."""
    values = np.asarray(values, dtype=float)
    n_units, n_years = values.shape
    years = np.arange(2007, 2007 + n_years) if years is None else np.asarray(years)
    units = units or ("T",) + tuple(f"C{i:02d}" for i in range(1, n_units))
    return OutcomePanel(tuple(units), years, values, student_fte)


def random_panel(rng, n_units=23, n_years=15, noise=0.01):
    alpha = rng.normal(0.05, 0.01, n_units)[:, None]
    gamma = rng.normal(0.0, 0.005, n_years)[None, :]
    return make_panel(alpha + gamma + rng.normal(0.0, noise, (n_units, n_years)))
