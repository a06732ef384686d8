"""First-order RC equivalent-circuit battery model with empirical aging.

States are the SoC and the current through the parallel resistor. The
terminal voltage is ``OCV(z) - R_p*I_r - R_s*I`` with a piecewise-linear
open-circuit-voltage table. Aging uses an empirical NMC correlation of
the Schmalstieg form: a calendar term growing with t^0.75, scaled by a
voltage/temperature factor, plus a cycling term growing with the square
root of charge throughput, scaled by RMS voltage and SoC swing.

Positive current charges the battery. Time is in seconds everywhere;
the SoC equation converts the Ah capacity internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

#: Forward-Euler step contract for the RC branch, seconds.
MAX_STEP_S = 5.0

SOC_TOL = 1e-9


@dataclass(frozen=True)
class SchmalstiegParams:
    """Coefficients of the empirical aging correlation.

    Calendar factor: ``alpha = (alpha_v_slope*V - alpha_v_offset) *
    alpha_pre * exp(-alpha_ea_over_r / T)``, giving relative capacity
    loss per (days)^0.75. Cycling factor: ``beta = beta_v_quad*(V_rms -
    beta_v_ref)^2 + beta_const + beta_soc_dev*soc_dev``, relative loss
    per sqrt(Ah). ``scale_divisor`` de-rates both factors; the published
    correlation overstates early cycling fade badly enough that optimal
    control would otherwise never touch the battery.
    """

    alpha_v_slope: float = 7.543
    alpha_v_offset: float = 23.75
    alpha_pre: float = 1e6
    alpha_ea_over_r: float = 6976.0  # activation energy over gas constant, K
    beta_v_quad: float = 7.348e-3
    beta_v_ref: float = 3.667
    beta_const: float = 7.6e-4
    beta_soc_dev: float = 4.081e-3
    scale_divisor: float = 5.0

    def __post_init__(self):
        if self.scale_divisor <= 0:
            raise ConfigError("scale_divisor must be positive")

    def alpha(self, v_mean: float, temperature_k: float) -> float:
        return (self.alpha_v_slope * v_mean - self.alpha_v_offset) * self.alpha_pre * np.exp(
            -self.alpha_ea_over_r / temperature_k
        )

    def beta(self, v_rms, soc_dev):
        return self.beta_v_quad * (v_rms - self.beta_v_ref) ** 2 + self.beta_const + self.beta_soc_dev * soc_dev


@dataclass(frozen=True)
class EcmParams:
    e_ah: float = 2.7  # charge capacity, Ah
    r_s_ohm: float = 0.01  # series resistance
    r_p_ohm: float = 0.015  # parallel resistance
    c_p_farad: float = 4000.0  # parallel capacitance
    ocv_z: np.ndarray = field(default=None, repr=False)  # SoC breakpoints, strictly increasing
    ocv_v: np.ndarray = field(default=None, repr=False)  # OCV values, strictly increasing
    v_min: float = 2.7
    v_max: float = 4.2
    n_cells: int = 750
    lambda_eur_per_ah: float = 1.2
    current_bound_a: float = 2.7  # |I| limit per cell, A
    temperature_k: float = 298.15  # fixed ambient for the aging law
    aging: SchmalstiegParams = field(default_factory=SchmalstiegParams)

    def __post_init__(self):
        if min(self.r_s_ohm, self.r_p_ohm, self.c_p_farad) <= 0:
            raise ConfigError("R_s, R_p and C_p must be positive")
        if self.v_min >= self.v_max:
            raise ConfigError("v_min must lie below v_max")
        z = np.asarray(self.ocv_z, dtype=float)
        v = np.asarray(self.ocv_v, dtype=float)
        if z.shape != v.shape or z.ndim != 1 or z.size < 2:
            raise ConfigError("OCV table needs matching 1-D soc and voltage columns")
        if np.any(np.diff(z) <= 0) or np.any(np.diff(v) <= 0):
            raise ConfigError("OCV table must be strictly increasing in soc and voltage")
        z.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "ocv_z", z)
        object.__setattr__(self, "ocv_v", v)

    @property
    def tau_s(self) -> float:
        """RC time constant of the parallel branch."""
        return self.r_p_ohm * self.c_p_farad

    def ocv(self, z):
        """Piecewise-linear OCV lookup; exact at the table breakpoints."""
        return np.interp(z, self.ocv_z, self.ocv_v)


@dataclass(frozen=True)
class EcmState:
    z: float
    i_r: float = 0.0


class StepResult(NamedTuple):
    state: EcmState
    violated: bool


def ecm_step(state: EcmState, current_a: float, dt_s: float, params: EcmParams) -> StepResult:
    """One forward-Euler step of the SoC and RC-branch equations."""
    if not 0 < dt_s <= MAX_STEP_S + 1e-12:
        raise ValueError(f"dt must be in (0, {MAX_STEP_S}] s")
    z_new = state.z + current_a * dt_s / (params.e_ah * 3600.0)
    i_r_new = state.i_r + dt_s * (current_a - state.i_r) / params.tau_s
    violated = bool(z_new < -SOC_TOL or z_new > 1.0 + SOC_TOL)
    return StepResult(EcmState(z=z_new, i_r=i_r_new), violated)


def ecm_voltage(state: EcmState, current_a: float, params: EcmParams) -> float:
    """Terminal voltage ``OCV(z) - R_p*I_r - R_s*I``."""
    return float(params.ocv(state.z) - params.r_p_ohm * state.i_r - params.r_s_ohm * current_a)


def ecm_rollout(
    x0: np.ndarray,
    current_a: np.ndarray,
    dt_s: float,
    n_steps: int,
    params: EcmParams,
    sample_steps: np.ndarray | None = None,
    record_z: bool = False,
):
    """Integrate a batch of trajectories under constant per-trajectory current.

    ``x0`` has shape (B, 2) as (z, i_r); ``current_a`` shape (B,). Returns a
    dict with the final states, left-endpoint time integrals of V and z,
    optional (V, z) samples at ``sample_steps`` (step index ``n_steps``
    meaning the final state) and an optional full z record, all batched.
    Pure function of its inputs; safe to call from parallel workers.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    cur = np.asarray(current_a, dtype=float)
    z = x0[:, 0].copy()
    i_r = x0[:, 1].copy()
    b = z.size

    dz = cur * (dt_s / (params.e_ah * 3600.0))
    a_rc = dt_s / params.tau_s

    sample_set = {} if sample_steps is None else {int(s): j for j, s in enumerate(sample_steps)}
    v_samples = np.empty((b, len(sample_set))) if sample_set else None
    x_samples = np.empty((b, len(sample_set), 2)) if sample_set else None
    z_rec = np.empty((b, n_steps)) if record_z else None

    v_int = np.zeros(b)
    v2_int = np.zeros(b)
    z_int = np.zeros(b)
    for step in range(n_steps):
        v = params.ocv(z) - params.r_p_ohm * i_r - params.r_s_ohm * cur
        if step in sample_set:
            j = sample_set[step]
            v_samples[:, j] = v
            x_samples[:, j, 0] = z
            x_samples[:, j, 1] = i_r
        if record_z:
            z_rec[:, step] = z
        v_int += v * dt_s
        v2_int += v * v * dt_s
        z_int += z * dt_s
        z += dz
        i_r += a_rc * (cur - i_r)
    if n_steps in sample_set:
        j = sample_set[n_steps]
        v_samples[:, j] = params.ocv(z) - params.r_p_ohm * i_r - params.r_s_ohm * cur
        x_samples[:, j, 0] = z
        x_samples[:, j, 1] = i_r

    out = {"x_end": np.stack([z, i_r], axis=1), "v_int": v_int, "v2_int": v2_int, "z_int": z_int}
    if sample_set:
        out["v_samples"] = v_samples
        out["x_samples"] = x_samples
    if record_z:
        out["z_record"] = z_rec
    return out


@dataclass(frozen=True)
class ProfileStats:
    """Trajectory statistics feeding the empirical aging correlation."""

    v_mean: float
    v_rms: float
    soc_dev: float  # mean SoC swing, 2*integral(|z_mean - z|)dt / T
    temperature_k: float
    t_end_h: float
    ah_throughput: float

    def __post_init__(self):
        if self.t_end_h < 0 or self.ah_throughput < 0:
            raise ValueError("duration and throughput must be non-negative")


def profile_stats(soc, voltage, current_a, temperature_k: float, dt_s: float) -> ProfileStats:
    """Reduce aligned trajectories to the statistics the aging law uses."""
    z = np.asarray(soc, dtype=float)
    v = np.asarray(voltage, dtype=float)
    i = np.asarray(current_a, dtype=float)
    if z.size == 0 or z.shape != v.shape or z.shape != i.shape:
        raise ValueError("trajectories must be non-empty and aligned")
    t_end_s = z.size * dt_s
    z_mean = float(np.mean(z))
    return ProfileStats(
        v_mean=float(np.mean(v)),
        v_rms=float(np.sqrt(np.mean(v**2))),
        soc_dev=float(2.0 * np.sum(np.abs(z_mean - z)) * dt_s / t_end_s),
        temperature_k=temperature_k,
        t_end_h=t_end_s / 3600.0,
        ah_throughput=float(np.sum(np.abs(i)) * dt_s / 3600.0),
    )


def schmalstieg_lost_capacity(stats: ProfileStats, params: EcmParams, aging: SchmalstiegParams | None = None) -> float:
    """Lost charge capacity in Ah predicted by the empirical correlation.

    ``(alpha/d) * t_days^0.75 * E + (beta/d) * sqrt(Ah) * E`` evaluated on
    the trajectory statistics; the calendar clock runs in days.
    """
    q = aging if aging is not None else params.aging
    if stats.t_end_h < 0 or stats.ah_throughput < 0:
        raise ValueError("negative duration or throughput")
    alpha = q.alpha(stats.v_mean, stats.temperature_k)
    beta = q.beta(stats.v_rms, stats.soc_dev)
    t_days = stats.t_end_h / 24.0
    return float((alpha * t_days**0.75 + beta * np.sqrt(stats.ah_throughput)) * params.e_ah / q.scale_divisor)


def schmalstieg_loss_increment(
    stats: ProfileStats,
    params: EcmParams,
    age_h: float,
    throughput_ah: float,
    aging: SchmalstiegParams | None = None,
) -> float:
    """Aging increment (Ah) from cumulative age/throughput over one window.

    Both terms of the correlation are concave in their time-like
    arguments, so chained windows must difference the cumulative curve
    rather than restart it; otherwise a year of windows would pay the
    steep early-life fade 365 times.
    """
    q = aging if aging is not None else params.aging
    alpha = q.alpha(stats.v_mean, stats.temperature_k)
    beta = q.beta(stats.v_rms, stats.soc_dev)
    t0_d = age_h / 24.0
    t1_d = (age_h + stats.t_end_h) / 24.0
    cal = alpha * (t1_d**0.75 - t0_d**0.75)
    cyc = beta * (np.sqrt(throughput_ah + stats.ah_throughput) - np.sqrt(throughput_ah))
    return float((cal + cyc) * params.e_ah / q.scale_divisor)
