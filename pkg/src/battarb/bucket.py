"""Energy-reservoir battery model with a linear throughput aging law.

The battery is a lossless tank of energy: the single state is the state
of charge and power flows in or out without efficiency loss or voltage
dynamics. Aging is charged linearly against energy throughput plus a
small penalty on the largest power level used, calibrated so that 8000
full cycles consume 20% of the capacity.

Positive power charges the battery. Cash revenue therefore carries the
opposite sign of the power-price product: charging buys energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .control import ControlProfile
from .errors import ConfigError
from .prices import PriceSeries

#: SoC window tolerance beyond which a step is flagged.
SOC_TOL = 1e-9


@dataclass(frozen=True)
class BucketParams:
    """Cell-level tank parameters.

    ``k_power_wh_per_w`` and ``k_throughput_wh_per_wh`` translate the
    peak power level (W) and the absolute energy throughput (Wh) into
    lost capacity (Wh). The defaults follow from an 8000-full-cycle,
    20%-fade end-of-life budget.
    """

    e_wh: float = 9.828  # energy capacity per cell, Wh
    n_cells: int = 750
    lambda_eur_per_wh: float = 0.33  # cost of lost energy capacity
    k_power_wh_per_w: float = 2.15e-4
    k_throughput_wh_per_wh: float = 1.25e-5
    power_bound_w: float = 9.828  # |P| limit per cell, W

    def __post_init__(self):
        if self.e_wh <= 0:
            raise ConfigError("e_wh must be positive")
        if self.n_cells < 1:
            raise ConfigError("n_cells must be at least 1")
        if self.k_power_wh_per_w < 0 or self.k_throughput_wh_per_wh < 0:
            raise ConfigError("aging coefficients must be non-negative")


@dataclass(frozen=True)
class BucketState:
    z: float  # state of charge in [0, 1]


class StepResult(NamedTuple):
    state: BucketState
    violated: bool


def bucket_step(state: BucketState, power_w: float, dt_s: float, params: BucketParams) -> StepResult:
    """Advance the SoC by ``power * dt / capacity``.

    The SoC is not clamped; leaving [0, 1] by more than ``SOC_TOL`` sets
    the violation flag and the caller decides what to do about it.
    """
    if dt_s <= 0:
        raise ValueError("dt must be positive")
    z_new = state.z + power_w * dt_s / (params.e_wh * 3600.0)
    violated = bool(z_new < -SOC_TOL or z_new > 1.0 + SOC_TOL)
    return StepResult(BucketState(z=z_new), violated)


def soc_trajectory(z0: float, profile: ControlProfile, params: BucketParams) -> np.ndarray:
    """SoC after each interval of ``profile`` (length ``len(profile)+1``, incl. z0)."""
    dz = profile.values * profile.dt_s / (params.e_wh * 3600.0)
    return np.concatenate([[z0], z0 + np.cumsum(dz)])


def bucket_lost_capacity(profile: ControlProfile, params: BucketParams) -> float:
    """Lost capacity in Wh per cell for a power profile.

    ``k_power * max|P| + k_throughput * integral(|P|) dt``; an empty
    profile loses nothing.
    """
    if profile.kind != "power":
        raise ValueError("bucket model expects a power profile")
    if len(profile) == 0:
        return 0.0
    throughput_wh = profile.abs_time_integral() / 3600.0
    return params.k_power_wh_per_w * profile.max_abs() + params.k_throughput_wh_per_wh * throughput_wh


def bucket_degradation_cost(profile: ControlProfile, params: BucketParams) -> float:
    """EUR cost of the lost capacity over the whole pack."""
    return bucket_lost_capacity(profile, params) * params.lambda_eur_per_wh * params.n_cells


def bucket_revenue(profile: ControlProfile, prices: PriceSeries, params: BucketParams) -> float:
    """Cash flow in EUR over the pack; discharging at positive prices earns.

    Charging is positive power, so the operator pays when P > 0:
    revenue = -N * integral(P * price) dt.
    """
    if profile.kind != "power":
        raise ValueError("bucket model expects a power profile")
    if len(profile) == 0:
        return 0.0
    if profile.duration_s > prices.horizon_s:
        raise ValueError(
            f"profile spans {profile.duration_s} s but prices cover only {prices.horizon_s} s"
        )
    t_mid = (np.arange(len(profile)) + 0.5) * profile.dt_s
    lam = prices.prices[(t_mid // 3600).astype(int)]
    energy_wh = profile.values * profile.dt_s / 3600.0
    return float(-params.n_cells * np.sum(energy_wh * lam))


def bucket_profit(profile: ControlProfile, prices: PriceSeries, params: BucketParams) -> float:
    return bucket_revenue(profile, prices, params) - bucket_degradation_cost(profile, params)
