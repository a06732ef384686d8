"""Single-particle lithium-ion cell model with SEI growth.

Each electrode is one representative spherical particle: lithium
diffuses radially (Fick), reacts at the surface through Butler-Volmer
kinetics, and the whole cell shares a lumped temperature. A parasitic
side reaction at the graphite surface grows a resistive SEI film and
permanently consumes cyclable lithium; it runs at rest as well as under
load and accelerates at high SoC, high temperature and hard charging.
The 13 states are the 5 nodal concentrations per electrode, the
temperature, the SEI thickness and the lost-lithium tally.

Sign conventions: the public API takes charge-positive current, like
the rest of the package. The kinetic and thermal expressions are
written for discharge-positive current internally, so the applied
current is negated once on entry.

Charge balance at the graphite surface: the applied interfacial current
splits into intercalation plus side-reaction current (a damped fixed
point on the overpotential). The particle surface flux carries the full
applied current while the side reaction drains lithium through a
uniform volumetric sink, so (particle lithium + lost lithium) is
conserved to machine precision by the discrete operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from . import spm_kernel as _kernel
from .cheb import RadialCollocation, radial_collocation
from .errors import ConfigError, KineticsError, MeasurementError

FARADAY = 96485.33212  # C/mol
R_GAS = 8.314462618  # J/(mol K)

#: Fixed reference potential (V) of the graphite surface in the SEI rate law.
SEI_REF_V = 0.4

#: Forward-Euler step contract, seconds.
MAX_STEP_S = 5.0

#: Relative concentration tolerance before a step is flagged.
CONC_TOL = 1e-9

_KINETICS_CLIP = 1e-9  # relative surface-stoichiometry floor for rate evaluation


def arrhenius(ref_value, e_act, temperature_k, t_ref_k):
    """Temperature scaling ``ref * exp[(E/R)(1/T - 1/T_ref)]``.

    The exponent is applied exactly as written: a positive activation
    energy slows the process above the reference temperature, so
    parameter sets list negative energies for rates that speed up when
    hot.
    """
    t = np.asarray(temperature_k, dtype=float)
    return ref_value * np.exp((e_act / R_GAS) * (1.0 / t - 1.0 / t_ref_k))


def exchange_current_density(c_surf, c_max, c_el, k_rate, alpha_ct, n_electrons, faraday=FARADAY):
    """Butler-Volmer exchange current density, A/m^2.

    Vanishes at an empty or saturated surface; raises outside the
    physical concentration window.
    """
    c = np.asarray(c_surf, dtype=float)
    if np.any(c < 0) or np.any(c > c_max):
        raise KineticsError("surface concentration outside [0, c_max]")
    return (
        n_electrons
        * faraday
        * k_rate
        * c**alpha_ct
        * c_el ** (1.0 - alpha_ct)
        * (c_max - c) ** (1.0 - alpha_ct)
    )


def butler_volmer_current(eta_v, j0, temperature_k, alpha_ct, n_electrons):
    """Interfacial current density from the overpotential (cathodic positive)."""
    x = n_electrons * FARADAY * np.asarray(eta_v) / (R_GAS * np.asarray(temperature_k))
    return j0 * (np.exp(-alpha_ct * x) - np.exp((1.0 - alpha_ct) * x))


def butler_volmer_overpotential(j, j0, temperature_k, alpha_ct=0.5, n_electrons=1):
    """Invert the kinetics: overpotential (V) producing current density ``j``.

    Cathodic (positive) current needs a negative overpotential. The
    symmetric case has the closed form ``-(2RT/nF) asinh(j / 2 j0)``;
    other transfer coefficients fall back to a bracketed root find.
    """
    if np.any(np.asarray(j0) <= 0):
        raise KineticsError("exchange current density must be positive")
    thermal_v = R_GAS * np.asarray(temperature_k, dtype=float) / (n_electrons * FARADAY)
    if alpha_ct == 0.5:
        return -2.0 * thermal_v * np.arcsinh(np.asarray(j) / (2.0 * np.asarray(j0)))

    def solve_one(j_s, j0_s, tv):
        def residual(eta):
            x = eta / tv
            return j0_s * (math.exp(-alpha_ct * x) - math.exp((1.0 - alpha_ct) * x)) - j_s

        width = tv
        while residual(-width) * residual(width) > 0 and width < 1e3 * tv:
            width *= 2.0
        return brentq(residual, -width, width, xtol=1e-15, rtol=8.9e-16)

    out = np.vectorize(solve_one)(j, j0, thermal_v)
    return out if np.ndim(j) else float(out)


@dataclass(frozen=True)
class ElectrodeParams:
    """Geometry, transport and kinetics of one electrode.

    ``area_m2`` is the total active particle surface of the electrode;
    the specific surface per particle volume is fixed at ``3/radius``
    so that surface and volumetric bookkeeping agree exactly.
    """

    radius_m: float
    c_max: float  # mol/m^3
    d_ref: float  # diffusion coefficient at T_ref, m^2/s
    e_act_d: float  # J/mol, applied as printed in `arrhenius`
    k_ref: float  # reaction rate constant at T_ref
    e_act_k: float
    area_m2: float
    ocv_stoich: np.ndarray = field(repr=False)  # surface stoichiometry breakpoints
    ocv_v: np.ndarray = field(repr=False)  # half-cell potential, V
    stoich_soc0: float = 0.0  # stoichiometry at 0% SoC
    stoich_soc100: float = 1.0

    def __post_init__(self):
        if min(self.radius_m, self.c_max, self.d_ref, self.k_ref, self.area_m2) <= 0:
            raise ConfigError("electrode geometry/transport parameters must be positive")
        s = np.asarray(self.ocv_stoich, dtype=float)
        v = np.asarray(self.ocv_v, dtype=float)
        if s.shape != v.shape or s.ndim != 1 or s.size < 2:
            raise ConfigError("electrode OCV table needs matching 1-D columns")
        if np.any(np.diff(s) <= 0):
            raise ConfigError("electrode OCV stoichiometry must be strictly increasing")
        dv = np.diff(v)
        if not (np.all(dv > 0) or np.all(dv < 0)):
            raise ConfigError("electrode OCV values must be strictly monotone")
        s.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "ocv_stoich", s)
        object.__setattr__(self, "ocv_v", v)

    @property
    def specific_surface(self) -> float:
        """Particle surface per particle volume, 3/R for spheres."""
        return 3.0 / self.radius_m

    @property
    def particle_volume_m3(self) -> float:
        """Total particle volume of the electrode, area / specific surface."""
        return self.area_m2 * self.radius_m / 3.0

    def ocv(self, stoich):
        return np.interp(stoich, self.ocv_stoich, self.ocv_v)


@dataclass(frozen=True)
class SeiParams:
    n_sei: float = 1.0  # electrons per side-reaction event
    k_ref: float = 1.9e-16  # kinetic coefficient at T_ref, mol/(m^2 s)
    e_act_k: float = -58000.0  # J/mol; negative speeds the reaction up when hot
    d_ref: float = 2.5e-18  # solvent transport through the film, mol/(m s)
    e_act_d: float = -20000.0
    molar_mass_kg: float = 0.162  # kg/mol of film product
    density_kg_m3: float = 1690.0
    r_ohm_per_m: float = 2.0e3  # film resistance per thickness
    delta0_m: float = 5.0e-9  # as-formed film thickness

    def __post_init__(self):
        if min(self.n_sei, self.k_ref, self.d_ref, self.molar_mass_kg, self.density_kg_m3, self.delta0_m) <= 0:
            raise ConfigError("SEI parameters must be positive")


@dataclass(frozen=True)
class ThermalParams:
    rho_kg_m3: float = 2100.0
    volume_m3: float = 3.2e-5
    c_p_j_per_kg_k: float = 1000.0
    h_w_per_m2_k: float = 10.0
    area_m2: float = 0.01  # outer cell surface
    t_env_k: float = 298.15
    t_ref_k: float = 298.15

    @property
    def heat_capacity_j_per_k(self) -> float:
        return self.rho_kg_m3 * self.volume_m3 * self.c_p_j_per_kg_k


@dataclass(frozen=True)
class SpmParams:
    pos: ElectrodeParams
    neg: ElectrodeParams
    sei: SeiParams = field(default_factory=SeiParams)
    thermal: ThermalParams = field(default_factory=ThermalParams)
    alpha_ct: float = 0.5
    n_electrons: int = 1
    c_el: float = 1000.0  # electrolyte lithium concentration, mol/m^3
    docv_dt_v_per_k: float = -1.0e-4  # entropic coefficient
    r_batt_ohm: float = 0.012
    v_min: float = 2.7
    v_max: float = 4.2
    n_cells: int = 750
    lambda_eur_per_ah: float = 1.2  # cost of lost cyclable lithium
    current_bound_a: float = 2.7

    def __post_init__(self):
        if not 0 < self.alpha_ct < 1:
            raise ConfigError("charge-transfer coefficient must lie in (0, 1)")
        if self.v_min >= self.v_max:
            raise ConfigError("v_min must lie below v_max")


@dataclass(frozen=True)
class SpmState:
    c_pos: np.ndarray  # mol/m^3 at the collocation nodes, center first
    c_neg: np.ndarray
    temperature_k: float
    sei_thickness_m: float
    lost_li_ah: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.c_pos, self.c_neg, [self.temperature_k, self.sei_thickness_m, self.lost_li_ah]]
        )

    @staticmethod
    def from_vector(x: np.ndarray, n_nodes: int = 5) -> "SpmState":
        x = np.asarray(x, dtype=float)
        return SpmState(
            c_pos=x[:n_nodes].copy(),
            c_neg=x[n_nodes : 2 * n_nodes].copy(),
            temperature_k=float(x[2 * n_nodes]),
            sei_thickness_m=float(x[2 * n_nodes + 1]),
            lost_li_ah=float(x[2 * n_nodes + 2]),
        )


class StepResult(NamedTuple):
    state: SpmState
    violated: bool


class SpmModel:
    """Simulation front end binding parameters to the discretization.

    Instances are cheap, hold no mutable state across calls, and may be
    used from one thread at a time; build one instance per worker.
    """

    def __init__(self, params: SpmParams, n_nodes: int = 5, side_reaction: bool = True):
        self.params = params
        self.n_nodes = n_nodes
        self.side_reaction = side_reaction
        self.disc_pos: RadialCollocation = radial_collocation(n_nodes, params.pos.radius_m)
        self.disc_neg: RadialCollocation = radial_collocation(n_nodes, params.neg.radius_m)
        self.state_dim = 2 * n_nodes + 3
        self._i_t = 2 * n_nodes
        self._i_d = 2 * n_nodes + 1
        self._i_l = 2 * n_nodes + 2

        # Fused two-electrode diffusion operator: one (B,2n) @ (2n,2n)
        # matmul instead of four small ones per evaluation.
        d1t = np.zeros((2 * n_nodes, 2 * n_nodes))
        d1t[:n_nodes, :n_nodes] = self.disc_pos.d1.T
        d1t[n_nodes:, n_nodes:] = self.disc_neg.d1.T
        self._d1t_block = d1t
        r = np.concatenate([self.disc_pos.r, self.disc_neg.r])
        self._inv_r = np.zeros_like(r)
        self._inv_r[1:n_nodes] = 1.0 / r[1:n_nodes]
        self._inv_r[n_nodes + 1 :] = 1.0 / r[n_nodes + 1 :]

    # ------------------------------------------------------------------
    # state construction and bookkeeping

    def initial_state(self, soc: float) -> SpmState:
        """Fresh, relaxed cell at the given SoC with an as-formed film."""
        p = self.params
        x_neg = p.neg.stoich_soc0 + soc * (p.neg.stoich_soc100 - p.neg.stoich_soc0)
        x_pos = p.pos.stoich_soc0 + soc * (p.pos.stoich_soc100 - p.pos.stoich_soc0)
        return SpmState(
            c_pos=np.full(self.n_nodes, x_pos * p.pos.c_max),
            c_neg=np.full(self.n_nodes, x_neg * p.neg.c_max),
            temperature_k=p.thermal.t_env_k,
            sei_thickness_m=p.sei.delta0_m,
            lost_li_ah=0.0,
        )

    def window_capacity_ah(self) -> float:
        """Charge swung across the negative stoichiometry window, Ah."""
        p = self.params.neg
        moles = abs(p.stoich_soc100 - p.stoich_soc0) * p.c_max * p.particle_volume_m3
        return moles * self.params.n_electrons * FARADAY / 3600.0

    def lithium_content_ah(self, x: np.ndarray):
        """(positive, negative) particle lithium inventories in Ah."""
        p = self.params
        scale = self.params.n_electrons * FARADAY / 3600.0
        pos = self.disc_pos.weighted_content(x[..., : self.n_nodes]) * (p.pos.area_m2 / p.pos.radius_m**2) * scale
        neg = (
            self.disc_neg.weighted_content(x[..., self.n_nodes : 2 * self.n_nodes])
            * (p.neg.area_m2 / p.neg.radius_m**2)
            * scale
        )
        return pos, neg

    def soc(self, x: np.ndarray):
        """SoC from the mean negative-electrode stoichiometry."""
        p = self.params.neg
        mean_c = 3.0 * self.disc_neg.weighted_content(x[..., self.n_nodes : 2 * self.n_nodes]) / p.radius_m**3
        stoich = mean_c / p.c_max
        return (stoich - p.stoich_soc0) / (p.stoich_soc100 - p.stoich_soc0)

    def remove_lithium(self, state: SpmState, ah: float) -> SpmState:
        """Artificially move ``ah`` of cyclable lithium into the lost tally."""
        p = self.params.neg
        moles = ah * 3600.0 / (self.params.n_electrons * FARADAY)
        return replace(
            state,
            c_neg=state.c_neg - moles / p.particle_volume_m3,
            lost_li_ah=state.lost_li_ah + ah,
        )

    # ------------------------------------------------------------------
    # batched physics core

    def _kinetics(self, x, i_app, side_reaction, eta0=None):
        """Shared electrochemical sub-evaluation for rhs and voltage.

        Returns a dict with per-trajectory overpotentials, SEI current,
        interfacial current densities, diffusivities and temperatures.
        ``x`` has shape (B, state_dim); ``i_app`` shape (B,) charge-positive.
        ``eta0`` warm-starts the side-reaction balance between steps.
        """
        p = self.params
        n = self.n_nodes
        t = x[:, self._i_t]
        delta = x[:, self._i_d]
        i_dis = -np.asarray(i_app, dtype=float)

        t_ref = p.thermal.t_ref_k
        d_pos = arrhenius(p.pos.d_ref, p.pos.e_act_d, t, t_ref)
        d_neg = arrhenius(p.neg.d_ref, p.neg.e_act_d, t, t_ref)
        k_pos = arrhenius(p.pos.k_ref, p.pos.e_act_k, t, t_ref)
        k_neg = arrhenius(p.neg.k_ref, p.neg.e_act_k, t, t_ref)

        nf = p.n_electrons * FARADAY
        clip = _KINETICS_CLIP
        cs_pos = np.clip(x[:, n - 1], clip * p.pos.c_max, (1.0 - clip) * p.pos.c_max)
        cs_neg = np.clip(x[:, 2 * n - 1], clip * p.neg.c_max, (1.0 - clip) * p.neg.c_max)
        a = p.alpha_ct
        if a == 0.5:
            sqrt_cel = np.sqrt(p.c_el)
            j0_pos = nf * k_pos * sqrt_cel * np.sqrt(cs_pos * (p.pos.c_max - cs_pos))
            j0_neg = nf * k_neg * sqrt_cel * np.sqrt(cs_neg * (p.neg.c_max - cs_neg))
        else:
            j0_pos = nf * k_pos * cs_pos**a * p.c_el ** (1 - a) * (p.pos.c_max - cs_pos) ** (1 - a)
            j0_neg = nf * k_neg * cs_neg**a * p.c_el ** (1 - a) * (p.neg.c_max - cs_neg) ** (1 - a)

        j_pos = i_dis / p.pos.area_m2  # cathodic-positive at each electrode
        j_neg_app = -i_dis / p.neg.area_m2

        thermal_v = R_GAS * t / nf
        eta_pos = -2.0 * thermal_v * np.arcsinh(j_pos / (2.0 * j0_pos))

        if side_reaction:
            k_sei = arrhenius(p.sei.k_ref, p.sei.e_act_k, t, t_ref)
            d_sei = arrhenius(p.sei.d_ref, p.sei.e_act_d, t, t_ref)
            ocv_neg = p.neg.ocv(cs_neg / p.neg.c_max)
            nf_sei = p.sei.n_sei * FARADAY
            denom = 1.0 / (nf_sei * k_sei * np.exp(-nf_sei * (ocv_neg - SEI_REF_V) / (R_GAS * t))) + delta / (
                nf_sei * d_sei
            )
            inv_thermal = nf / (R_GAS * t)

            # Damped fixed point on the overpotential: the applied
            # interfacial current equals intercalation plus side-reaction
            # current. Full steps while the residual shrinks, halved
            # steps otherwise; the side current is orders of magnitude
            # below the main reaction, so 2-3 iterations usually land
            # below the 1e-10 A/m^2 residual target. Consecutive steps
            # warm-start from the previous balance point.
            if eta0 is None:
                eta = -2.0 * thermal_v * np.arcsinh(j_neg_app / (2.0 * j0_neg))
            else:
                eta = eta0.copy()
            i_sei = np.exp(-inv_thermal * eta) / denom
            resid_prev = np.inf
            damping = 1.0
            for _ in range(50):
                resid = -2.0 * j0_neg * np.sinh(0.5 * inv_thermal * eta) + i_sei - j_neg_app
                worst = float(np.max(np.abs(resid)))
                if worst <= 1e-10:
                    break
                if worst > 0.5 * resid_prev:
                    damping = max(0.25, 0.5 * damping)
                resid_prev = worst
                eta_next = -2.0 * thermal_v * np.arcsinh((j_neg_app - i_sei) / (2.0 * j0_neg))
                eta = eta + damping * (eta_next - eta)
                i_sei = np.exp(-inv_thermal * eta) / denom
            eta_neg = eta
        else:
            i_sei = np.zeros_like(j_neg_app)
            eta_neg = -2.0 * thermal_v * np.arcsinh(j_neg_app / (2.0 * j0_neg))

        return {
            "i_dis": i_dis,
            "t": t,
            "delta": delta,
            "d_pos": d_pos,
            "d_neg": d_neg,
            "eta_pos": eta_pos,
            "eta_neg": eta_neg,
            "i_sei": i_sei,
            "j_pos": j_pos,
            "j_neg_app": j_neg_app,
            "cs_pos": cs_pos,
            "cs_neg": cs_neg,
        }

    def _rhs_batch(self, x, i_app, side_reaction=None, kin=None):
        """Full 13-dimensional time derivative, batched over axis 0."""
        p = self.params
        n = self.n_nodes
        if side_reaction is None:
            side_reaction = self.side_reaction
        if kin is None:
            kin = self._kinetics(x, i_app, side_reaction)

        nf = p.n_electrons * FARADAY
        dx = np.empty_like(x)
        # Fused spherical diffusion for both electrodes: differentiate,
        # impose the symmetry and flux boundary gradients, then expand
        # g' + 2 g/r with the L'Hopital value 3 g'(0) at each center.
        g = x[:, : 2 * n] @ self._d1t_block
        g[:, 0] = 0.0
        g[:, n] = 0.0
        g[:, n - 1] = kin["j_pos"] / (nf * kin["d_pos"])
        g[:, 2 * n - 1] = kin["j_neg_app"] / (nf * kin["d_neg"])
        dg = g @ self._d1t_block
        m = np.multiply(g, self._inv_r, out=g)  # g is not needed past this point
        m[:, 0] = dg[:, 0]
        m[:, n] = dg[:, n]
        m *= 2.0
        lap = np.add(dg, m, out=dg)
        lap[:, :n] *= kin["d_pos"][:, None]
        lap[:, n:] *= kin["d_neg"][:, None]
        dx[:, : 2 * n] = lap
        dx[:, n : 2 * n] -= (kin["i_sei"] * p.neg.specific_surface / nf)[:, None]

        i_dis, t = kin["i_dis"], kin["t"]
        heat = (
            i_dis**2 * p.r_batt_ohm
            + i_dis * (kin["eta_neg"] - kin["eta_pos"])
            + i_dis * t * p.docv_dt_v_per_k
            - p.thermal.h_w_per_m2_k * p.thermal.area_m2 * (t - p.thermal.t_env_k)
        )
        dx[:, self._i_t] = heat / p.thermal.heat_capacity_j_per_k
        dx[:, self._i_d] = kin["i_sei"] * p.sei.molar_mass_kg / (p.sei.n_sei * FARADAY * p.sei.density_kg_m3)
        dx[:, self._i_l] = kin["i_sei"] * p.neg.area_m2 / 3600.0
        return dx

    def _voltage_batch(self, x, i_app, kin):
        p = self.params
        v = (
            p.pos.ocv(kin["cs_pos"] / p.pos.c_max)
            - p.neg.ocv(kin["cs_neg"] / p.neg.c_max)
            + (kin["t"] - p.thermal.t_ref_k) * p.docv_dt_v_per_k
            - (kin["eta_neg"] - kin["eta_pos"])
            - (p.r_batt_ohm + p.sei.r_ohm_per_m * kin["delta"]) * kin["i_dis"]
        )
        return v

    def _violation_metrics(self, x):
        """Worst relative concentration-bound excursion of a state batch."""
        p = self.params
        n = self.n_nodes
        cp = x[:, :n] / p.pos.c_max
        cn = x[:, n : 2 * n] / p.neg.c_max
        low = min(cp.min(initial=np.inf), cn.min(initial=np.inf))
        high = max(cp.max(initial=-np.inf), cn.max(initial=-np.inf))
        return max(0.0, -low, high - 1.0)

    def rollout(
        self,
        x0: np.ndarray,
        i_app: np.ndarray,
        dt_s: float,
        n_steps: int,
        *,
        side_reaction: bool | None = None,
        sample_steps=None,
        record_v: bool = False,
        track_violations: bool = False,
        force_numpy: bool = False,
    ) -> dict:
        """Integrate a batch of trajectories at constant per-trajectory current.

        Forward Euler with ``dt_s <= 5`` s. Voltage integrals use the
        left endpoint of each step, matching the Euler quadrature. When
        ``sample_steps`` is given (step index ``n_steps`` meaning the
        final state), voltages and states at those steps come back for
        path-constraint checks. Dispatches to the compiled kernel when
        numba is importable; the numpy code below is the reference
        implementation.
        """
        if not 0 < dt_s <= MAX_STEP_S + 1e-12:
            raise ValueError(f"dt must be in (0, {MAX_STEP_S}] s")
        if side_reaction is None:
            side_reaction = self.side_reaction
        batch = 1 if np.ndim(x0) < 2 else np.shape(x0)[0]
        # per-trajectory compiled loop wins except on very wide batches,
        # where the vectorized numpy path amortizes better
        if _kernel.HAVE_NUMBA and not force_numpy and batch < 2048:
            return self._rollout_compiled(
                x0, i_app, dt_s, n_steps, side_reaction, sample_steps, record_v, track_violations
            )
        x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
        cur = np.broadcast_to(np.asarray(i_app, dtype=float), (x.shape[0],))
        b = x.shape[0]

        sample_map = {} if sample_steps is None else {int(s): j for j, s in enumerate(sample_steps)}
        v_samples = np.empty((b, len(sample_map))) if sample_map else None
        x_samples = np.empty((b, len(sample_map), self.state_dim)) if sample_map else None
        v_steps = np.empty((b, n_steps)) if record_v else None

        v_int = np.zeros(b)
        v_low = np.inf
        v_high = -np.inf
        c_excursion = 0.0
        eta_warm = None

        for step in range(n_steps):
            kin = self._kinetics(x, cur, side_reaction, eta0=eta_warm)
            eta_warm = kin["eta_neg"] if side_reaction else None
            v = self._voltage_batch(x, cur, kin)
            if step in sample_map:
                j = sample_map[step]
                v_samples[:, j] = v
                x_samples[:, j] = x
            if record_v:
                v_steps[:, step] = v
            if track_violations:
                v_low = min(v_low, float(v.min()))
                v_high = max(v_high, float(v.max()))
                c_excursion = max(c_excursion, self._violation_metrics(x))
            v_int += v * dt_s
            x += dt_s * self._rhs_batch(x, cur, side_reaction, kin)

        if n_steps in sample_map or track_violations:
            kin = self._kinetics(x, cur, side_reaction, eta0=eta_warm)
            v = self._voltage_batch(x, cur, kin)
            if n_steps in sample_map:
                j = sample_map[n_steps]
                v_samples[:, j] = v
                x_samples[:, j] = x
            if track_violations:
                v_low = min(v_low, float(v.min()))
                v_high = max(v_high, float(v.max()))
                c_excursion = max(c_excursion, self._violation_metrics(x))

        out = {"x_end": x, "v_int": v_int}
        if sample_map:
            out["v_samples"] = v_samples
            out["x_samples"] = x_samples
        if record_v:
            out["v_steps"] = v_steps
        if track_violations:
            out["v_low"] = v_low
            out["v_high"] = v_high
            out["c_excursion"] = c_excursion
        return out

    def _rollout_compiled(self, x0, i_app, dt_s, n_steps, side_reaction, sample_steps, record_v, track_violations):
        p = self.params
        x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
        b = x.shape[0]
        cur = np.ascontiguousarray(np.broadcast_to(np.asarray(i_app, dtype=float), (b,)))
        steps = np.asarray(sample_steps if sample_steps is not None else [], dtype=np.int64)
        n_samples = steps.size
        v_int = np.zeros(b)
        v_samples = np.empty((b, n_samples))
        x_samples = np.empty((b, n_samples, self.state_dim))
        v_steps = np.empty((b, n_steps if record_v else 0))
        viol = np.empty((b, 3))
        nf = p.n_electrons * FARADAY
        _kernel.rollout_kernel(
            x,
            cur,
            dt_s,
            n_steps,
            side_reaction,
            self.disc_pos.d1,
            self.disc_neg.d1,
            self._inv_r[: self.n_nodes],
            self._inv_r[self.n_nodes :],
            p.pos.c_max,
            p.neg.c_max,
            p.pos.d_ref,
            p.pos.e_act_d,
            p.neg.d_ref,
            p.neg.e_act_d,
            p.pos.k_ref,
            p.pos.e_act_k,
            p.neg.k_ref,
            p.neg.e_act_k,
            p.pos.area_m2,
            p.neg.area_m2,
            p.neg.specific_surface,
            p.pos.ocv_stoich,
            p.pos.ocv_v,
            p.neg.ocv_stoich,
            p.neg.ocv_v,
            p.alpha_ct,
            nf,
            p.c_el,
            p.docv_dt_v_per_k,
            p.r_batt_ohm,
            p.sei.r_ohm_per_m,
            p.sei.n_sei * FARADAY,
            p.sei.k_ref,
            p.sei.e_act_k,
            p.sei.d_ref,
            p.sei.e_act_d,
            SEI_REF_V,
            p.sei.molar_mass_kg / (p.sei.n_sei * FARADAY * p.sei.density_kg_m3),
            p.neg.area_m2 / 3600.0,
            p.thermal.heat_capacity_j_per_k,
            p.thermal.h_w_per_m2_k * p.thermal.area_m2,
            p.thermal.t_env_k,
            p.thermal.t_ref_k,
            R_GAS,
            v_int,
            steps,
            v_samples,
            x_samples,
            v_steps,
            np.array([1 if record_v else 0, 1 if track_violations else 0], dtype=np.int64),
            viol,
        )
        out = {"x_end": x, "v_int": v_int}
        if n_samples:
            out["v_samples"] = v_samples
            out["x_samples"] = x_samples
        if record_v:
            out["v_steps"] = v_steps
        if track_violations:
            out["v_low"] = float(viol[:, 0].min())
            out["v_high"] = float(viol[:, 1].max())
            out["c_excursion"] = float(viol[:, 2].max())
        return out

    # ------------------------------------------------------------------
    # scalar public API

    def rhs(self, state: SpmState, current_a: float) -> np.ndarray:
        """Time derivative of the 13-entry state vector."""
        x = state.as_vector()[None, :]
        return self._rhs_batch(x, np.array([current_a]))[0]

    def step(self, state: SpmState, current_a: float, dt_s: float) -> StepResult:
        """One forward-Euler step; flags concentration-bound violations."""
        if not 0 < dt_s <= MAX_STEP_S + 1e-12:
            raise ValueError(f"dt must be in (0, {MAX_STEP_S}] s")
        x = state.as_vector()[None, :]
        x_new = x + dt_s * self._rhs_batch(x, np.array([current_a]))
        violated = self._violation_metrics(x_new) > CONC_TOL
        return StepResult(SpmState.from_vector(x_new[0], self.n_nodes), bool(violated))

    def voltage(self, state: SpmState, current_a: float) -> float:
        """Terminal voltage; raises if the surface kinetics are singular."""
        p = self.params
        for cs, elec in ((state.c_pos[-1], p.pos), (state.c_neg[-1], p.neg)):
            if not 0 < cs < elec.c_max:
                raise KineticsError(
                    f"surface concentration {cs:.6g} outside (0, {elec.c_max:.6g}) mol/m^3"
                )
        x = state.as_vector()[None, :]
        cur = np.array([current_a])
        kin = self._kinetics(x, cur, self.side_reaction)
        return float(self._voltage_batch(x, cur, kin)[0])

    def voltage_of_vector(self, x: np.ndarray, current_a: float, side_reaction: bool | None = None) -> float:
        if side_reaction is None:
            side_reaction = self.side_reaction
        xb = np.atleast_2d(x)
        cur = np.array([current_a])
        kin = self._kinetics(xb, cur, side_reaction)
        return float(self._voltage_batch(xb, cur, kin)[0])

    def measure_capacity(self, state: SpmState, dt_s: float = MAX_STEP_S, rate_c: float = 1.0 / 25.0) -> float:
        """Discharged Ah of a slow full cycle from the given state.

        Constant-current charge to the upper voltage limit, one hour of
        rest, then constant-current discharge to the lower limit, all at
        C/25 by default. The side reaction is disabled for the duration
        so a checkup does not age the cell it is measuring; the final
        crossing is interpolated in voltage for sub-step resolution.
        """
        p = self.params
        i_mag = self.window_capacity_ah() * rate_c
        x = state.as_vector()[None, :].copy()
        max_steps = int(round(60 * 3600 / dt_s))

        def run_cc(x, current, stop_high):
            """Integrate until the voltage limit; returns x and fractional step count."""
            cur = np.array([current])
            v_prev = None
            v = None
            for step in range(max_steps):
                kin = self._kinetics(x, cur, False)
                v = float(self._voltage_batch(x, cur, kin)[0])
                crossed = v >= p.v_max if stop_high else v <= p.v_min
                if crossed:
                    if v_prev is None:
                        return x, 0.0
                    limit = p.v_max if stop_high else p.v_min
                    frac = (limit - v_prev) / (v - v_prev)
                    return x, step - 1 + max(0.0, min(1.0, frac))
                x += dt_s * self._rhs_batch(x, cur, False, kin)
                v_prev = v
            side = "upper" if stop_high else "lower"
            raise MeasurementError(
                f"{side} voltage limit not reached within {max_steps * dt_s / 3600:.0f} h at "
                f"{current:.4g} A (last V = {v:.4f})"
            )

        x, _ = run_cc(x, +i_mag, stop_high=True)
        rest = self.rollout(x, np.array([0.0]), dt_s, int(3600 / dt_s), side_reaction=False)
        x = rest["x_end"]
        x, steps = run_cc(x, -i_mag, stop_high=False)
        return float(i_mag * steps * dt_s / 3600.0)


def sei_current_density(eta_neg_v, ocv_neg_v, delta_m, temperature_k, params: SpmParams):
    """Side-reaction current density (A/m^2), always non-negative.

    Transport through the film throttles the rate as it thickens, so the
    density tends to zero for very thick films.
    """
    if np.any(np.asarray(delta_m) <= 0):
        raise ValueError("film thickness must be positive")
    t = np.asarray(temperature_k, dtype=float)
    t_ref = params.thermal.t_ref_k
    k_sei = arrhenius(params.sei.k_ref, params.sei.e_act_k, t, t_ref)
    d_sei = arrhenius(params.sei.d_ref, params.sei.e_act_d, t, t_ref)
    nf = params.n_electrons * FARADAY
    nf_sei = params.sei.n_sei * FARADAY
    denom = 1.0 / (nf_sei * k_sei * np.exp(-nf_sei * (np.asarray(ocv_neg_v) - SEI_REF_V) / (R_GAS * t))) + np.asarray(
        delta_m
    ) / (nf_sei * d_sei)
    return np.exp(-nf * np.asarray(eta_neg_v) / (R_GAS * t)) / denom
