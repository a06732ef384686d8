import numpy as np
import pytest

from battarb.config import load_bucket_params, load_ecm_params, load_spm_params
from battarb.prices import EUR_MWH_TO_EUR_WH, PriceSeries
from datetime import datetime


@pytest.fixture(scope="session")
def bucket_params():
    return load_bucket_params()


@pytest.fixture(scope="session")
def ecm_params():
    return load_ecm_params()


@pytest.fixture(scope="session")
def spm_params():
    return load_spm_params()


def synthetic_prices(n_days: int, start=datetime(2014, 1, 1), seed: int = 0) -> PriceSeries:
    """Deterministic day-ahead-looking price series in EUR/Wh.

    Cheap nights, pricey mornings and evenings, a weekly swell and one
    negative-price hour early on Sunday mornings.
    """
    hours = np.arange(n_days * 24)
    hod = hours % 24
    dow = (hours // 24) % 7
    base = 45.0 + 18.0 * np.sin(2 * np.pi * (hod - 10.0) / 24.0) + 8.0 * np.sin(4 * np.pi * (hod - 7.0) / 24.0)
    base += 5.0 * np.sin(2 * np.pi * hours / (24.0 * 7.0))
    base[(dow == 6) & (hod == 4)] = -5.0
    return PriceSeries(start=start, prices=base * EUR_MWH_TO_EUR_WH)


@pytest.fixture(scope="session")
def prices_week():
    return synthetic_prices(8)
