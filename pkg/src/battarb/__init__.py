"""Grid battery price arbitrage with physics-based degradation models.

Three battery models of increasing fidelity (energy bucket, RC
equivalent circuit, thermal single-particle model with SEI growth), a
multiple-shooting optimal-control layer, a sliding-window driver for
long horizons, safety validation against the particle-model oracle, and
an aging benchmark harness.
"""

__version__ = "0.1.0"

from .bucket import BucketParams, BucketState, bucket_lost_capacity, bucket_revenue, bucket_step
from .control import ControlProfile, load_profile
from .ecm import (
    EcmParams,
    EcmState,
    ProfileStats,
    SchmalstiegParams,
    ecm_step,
    ecm_voltage,
    profile_stats,
    schmalstieg_lost_capacity,
)
from .prices import PriceSeries, load_prices
from .spm import (
    SpmModel,
    SpmParams,
    SpmState,
    arrhenius,
    butler_volmer_overpotential,
    exchange_current_density,
    sei_current_density,
)

__all__ = [
    "BucketParams",
    "BucketState",
    "ControlProfile",
    "EcmParams",
    "EcmState",
    "PriceSeries",
    "ProfileStats",
    "SchmalstiegParams",
    "SpmModel",
    "SpmParams",
    "SpmState",
    "arrhenius",
    "bucket_lost_capacity",
    "bucket_revenue",
    "bucket_step",
    "butler_volmer_overpotential",
    "ecm_step",
    "ecm_voltage",
    "exchange_current_density",
    "load_prices",
    "load_profile",
    "profile_stats",
    "schmalstieg_lost_capacity",
    "sei_current_density",
]
