"""Finite-horizon optimal control of one battery model.

The nonlinear models go through a multiple-shooting transcription: one
state vector per 15-minute interval, one control per interval, equality
defects tying each node to the forward-Euler integration of the
previous one, and voltage/concentration path constraints sampled inside
every interval. Derivatives are central finite differences taken block
by block (each defect only sees its own node and control), evaluated in
one large batched rollout per gradient. The bucket model short-circuits
to a linear program.

Objectives are cash-flow based: revenue alone, or profit = revenue
minus the model's own degradation cost over the horizon. Controls are
charge-positive. The nonsmooth |u| terms inside degradation costs are
replaced by sqrt(u^2 + eps^2) smoothing in the optimizer objective only;
accounting elsewhere uses exact absolute values.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .auglag import AugLagOptions, AugLagResult, EvalResult, minimize_auglag
from .bucket import BucketParams
from .control import ControlProfile
from .ecm import EcmParams, ecm_rollout
from .errors import ConfigError
from .prices import PriceSeries
from .spm import SpmModel, SpmParams

_FD_STEP = 6.06e-6  # cube root of machine epsilon, scaled variables
_SMOOTH_EPS_A = 1e-3  # |u| smoothing, A or W
_SMOOTH_EPS_AH = 1e-2  # sqrt(throughput) smoothing, Ah; keeps curvature finite at rest


@dataclass(frozen=True)
class OcpSpec:
    """One finite-horizon optimal control problem."""

    model: str  # bucket | ecm | spm
    params: object
    prices: PriceSeries
    initial_state: np.ndarray
    horizon_s: float = 48 * 3600.0
    control_dt_s: float = 900.0
    integration_dt_s: float = 5.0
    objective: str = "profit"  # profit | revenue
    control_bounds: tuple[float, float] | None = None
    age_h: float = 0.0  # cumulative cell age entering the window
    cum_throughput_ah: float = 0.0

    def __post_init__(self):
        if self.model not in ("bucket", "ecm", "spm"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.objective not in ("profit", "revenue"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.horizon_s <= 0:
            raise ConfigError("horizon must be positive")
        n_int = self.horizon_s / self.control_dt_s
        if abs(n_int - round(n_int)) > 1e-9:
            raise ConfigError("horizon must be a whole number of control intervals")
        n_sub = self.control_dt_s / self.integration_dt_s
        if abs(n_sub - round(n_sub)) > 1e-9:
            raise ConfigError("control interval must be a whole number of integration steps")
        if self.integration_dt_s > 5.0 + 1e-12:
            raise ConfigError("integration step must not exceed 5 s")
        if self.prices.horizon_s < self.horizon_s:
            raise ConfigError("price series does not cover the horizon")

    @property
    def n_intervals(self) -> int:
        return int(round(self.horizon_s / self.control_dt_s))

    @property
    def steps_per_interval(self) -> int:
        return int(round(self.control_dt_s / self.integration_dt_s))


@dataclass
class SolveReport:
    status: str  # optimal | max_iter | infeasible
    objective_eur: float
    max_defect: float
    max_violation: float
    iterations: int
    wall_time_s: float
    kkt_residual: float = float("nan")
    duality_gap: float = float("nan")
    rest_substituted: bool = False


def _interval_prices(prices: PriceSeries, n_intervals: int, control_dt_s: float) -> np.ndarray:
    return np.array([prices.at((k + 0.5) * control_dt_s) for k in range(n_intervals)])


def _smooth_abs(u, eps=_SMOOTH_EPS_A):
    return np.sqrt(u * u + eps * eps) - eps


_SOC_DEV_EPS = 1e-4  # SoC units; bias in the deviation integral is below this


def _linear_smooth_abs_mean(wa, wb, eps=_SOC_DEV_EPS):
    """Average of sqrt(w^2 + eps^2) along a linear sweep from wa to wb.

    Closed form of the integral, so the SoC-deviation statistic needs no
    fine time record and stays twice differentiable through crossings.
    """

    def antideriv(w):
        return 0.5 * (w * np.sqrt(w * w + eps * eps) + eps * eps * np.arcsinh(w / eps))

    span = wb - wa
    near = np.abs(span) < 1e-12
    span_safe = np.where(near, 1.0, span)
    mean = (antideriv(wb) - antideriv(wa)) / span_safe
    flat = np.sqrt(0.25 * (wa + wb) ** 2 + eps * eps)
    return np.where(near, flat, mean)


# ----------------------------------------------------------------------
# per-model shooting adapters


class _BucketShooting:
    """Tank model through the generic shooting machinery (test path).

    Production bucket solves go through :func:`solve_bucket_lp`; this
    adapter exists so the shooting and derivative code can be exercised
    on a one-state model with a closed-form optimum.
    """

    state_dim = 1
    control_kind = "power"
    n_samples = 0
    ineq_per_interval = 0

    def __init__(self, spec: OcpSpec):
        p: BucketParams = spec.params
        self.p = p
        self.spec = spec
        self.x_scale = np.ones(1)
        self.u_scale = p.power_bound_w
        self.node_lb = np.array([0.0])
        self.node_ub = np.array([1.0])
        self.u_lb, self.u_ub = spec.control_bounds or (-p.power_bound_w, p.power_bound_w)
        self.lam = _interval_prices(spec.prices, spec.n_intervals, spec.control_dt_s)
        self.dt_h = spec.control_dt_s / 3600.0
        self._pnorm = 16

    def rollout(self, x, u):
        x_end = x + (u * self.spec.control_dt_s / (self.p.e_wh * 3600.0))[:, None]
        return {"x_end": x_end}

    def ineq(self, out, n_intervals):
        return np.zeros((out["x_end"].shape[0], 0))

    def objective_state(self, out, u, nodes):
        sabs = _smooth_abs(u, 1e-6 * self.u_scale)
        return {
            "rev_terms": -self.p.n_cells * self.lam * u * self.dt_h,
            "sabs": sabs,
            "sabs_p": (sabs / self.u_scale) ** self._pnorm,
        }

    def _value(self, rev_sum, sabs_sum, sabs_p_sum):
        revenue = rev_sum
        if self.spec.objective == "revenue":
            return revenue
        smax = self.u_scale * sabs_p_sum ** (1.0 / self._pnorm)
        lost = self.p.k_power_wh_per_w * smax + self.p.k_throughput_wh_per_wh * sabs_sum * self.dt_h
        return revenue - self.p.lambda_eur_per_wh * self.p.n_cells * lost

    def objective(self, state):
        return self._value(state["rev_terms"].sum(), state["sabs"].sum(), state["sabs_p"].sum())

    def objective_swapped(self, state, sums, k, out_k, u_k, node_k=None):
        sabs = _smooth_abs(u_k, 1e-6 * self.u_scale)
        return self._value(
            sums[0] - state["rev_terms"][k] + (-self.p.n_cells * self.lam[k] * u_k * self.dt_h),
            sums[1] - state["sabs"][k] + sabs,
            sums[2] - state["sabs_p"][k] + (sabs / self.u_scale) ** self._pnorm,
        )

    def objective_sums(self, state):
        return (state["rev_terms"].sum(), state["sabs"].sum(), state["sabs_p"].sum())

    def terminal_gradient(self, x_terminal):
        return np.zeros(1)

    def objective_scale(self):
        return max(1e-6, self.p.n_cells * float(np.mean(np.abs(self.lam))) * self.u_scale * self.dt_h * len(self.lam) * 0.25)


class _EcmShooting:
    state_dim = 2
    control_kind = "current"

    def __init__(self, spec: OcpSpec):
        p: EcmParams = spec.params
        self.p = p
        self.spec = spec
        self.x_scale = np.array([1.0, max(1.0, p.current_bound_a)])
        self.node_lb = np.array([0.0, -np.inf])
        self.node_ub = np.array([1.0, np.inf])
        self.u_scale = p.current_bound_a
        self.u_lb, self.u_ub = spec.control_bounds or (-p.current_bound_a, p.current_bound_a)
        self.lam = _interval_prices(spec.prices, spec.n_intervals, spec.control_dt_s)
        n = spec.steps_per_interval
        q = n // 4
        self.sample_steps = [0, q, 2 * q, 3 * q, n]
        self.n_samples = len(self.sample_steps)
        self.ineq_per_interval = 2 * self.n_samples
        self._v_span = p.v_max - p.v_min

    def rollout(self, x, u):
        return ecm_rollout(
            x,
            u,
            self.spec.integration_dt_s,
            self.spec.steps_per_interval,
            self.p,
            sample_steps=self.sample_steps,
        )

    def ineq(self, out, n_intervals):
        v = out["v_samples"]
        return np.concatenate([(v - self.p.v_min) / self._v_span, (self.p.v_max - v) / self._v_span], axis=1)

    def _z_span(self, z_start, u):
        # SoC is linear in time under a constant interval current
        return z_start, z_start + u * self.spec.control_dt_s / (self.p.e_ah * 3600.0)

    def objective_state(self, out, u, nodes):
        za, zb = self._z_span(nodes[:-1, 0], u)
        return {
            "rev_terms": -self.p.n_cells / 3600.0 * self.lam * u * out["v_int"],
            "v_int": out["v_int"],
            "v2_int": out["v2_int"],
            "za": za,
            "zb": zb,
            "u": u.copy(),
        }

    def objective_sums(self, state):
        return (
            state["rev_terms"].sum(),
            state["v_int"].sum(),
            state["v2_int"].sum(),
            (state["za"] + state["zb"]).sum(),
            _smooth_abs(state["u"]).sum(),
        )

    def _value(self, rev, v_sum, v2_sum, z_mid2_sum, sabs_sum, za, zb):
        if self.spec.objective == "revenue":
            return rev
        spec = self.spec
        t = spec.horizon_s
        v_mean = v_sum / t
        v_rms = np.sqrt(max(v2_sum / t, 0.0))
        z_mean = 0.5 * z_mid2_sum / len(za)
        dev_means = _linear_smooth_abs_mean(za - z_mean, zb - z_mean)
        soc_dev = 2.0 * float(np.sum(dev_means)) * spec.control_dt_s / t
        throughput = sabs_sum * spec.control_dt_s / 3600.0
        aging = self.p.aging
        alpha = aging.alpha(v_mean, self.p.temperature_k)
        beta = aging.beta(v_rms, soc_dev)
        t0_d = spec.age_h / 24.0
        t1_d = (spec.age_h + t / 3600.0) / 24.0
        q0 = spec.cum_throughput_ah
        cal = alpha * (t1_d**0.75 - t0_d**0.75)
        cyc = beta * (np.sqrt(q0 + throughput + _SMOOTH_EPS_AH) - np.sqrt(q0 + _SMOOTH_EPS_AH))
        loss_ah = (cal + cyc) * self.p.e_ah / aging.scale_divisor
        return rev - self.p.lambda_eur_per_ah * self.p.n_cells * loss_ah

    def objective(self, state):
        sums = self.objective_sums(state)
        return self._value(*sums, state["za"], state["zb"])

    def objective_swapped(self, state, sums, k, out_k, u_k, node_k=None):
        rev_k = -self.p.n_cells / 3600.0 * self.lam[k] * u_k * out_k["v_int"]
        za_k = state["za"][k] if node_k is None else node_k[0]
        za_k, zb_k = self._z_span(za_k, u_k)
        za = state["za"].copy()
        zb = state["zb"].copy()
        za[k] = za_k
        zb[k] = zb_k
        return self._value(
            sums[0] - state["rev_terms"][k] + rev_k,
            sums[1] - state["v_int"][k] + out_k["v_int"],
            sums[2] - state["v2_int"][k] + out_k["v2_int"],
            sums[3] - (state["za"][k] + state["zb"][k]) + (za_k + zb_k),
            sums[4] - _smooth_abs(state["u"][k]) + _smooth_abs(u_k),
            za,
            zb,
        )

    def terminal_gradient(self, x_terminal):
        return np.zeros(2)

    def objective_scale(self):
        return max(
            1e-6,
            self.p.n_cells * float(np.mean(np.abs(self.lam))) * self.u_scale * 3.7 * self.spec.horizon_s / 3600.0 * 0.25,
        )


class _SpmShooting:
    control_kind = "current"

    def __init__(self, spec: OcpSpec):
        p: SpmParams = spec.params
        self.p = p
        self.spec = spec
        self.model = SpmModel(p)
        n_nodes = self.model.n_nodes
        self.state_dim = self.model.state_dim
        self.x_scale = np.concatenate(
            [
                np.full(n_nodes, p.pos.c_max),
                np.full(n_nodes, p.neg.c_max),
                [100.0, 1e-8, 1e-3],
            ]
        )
        self.node_lb = np.concatenate([np.zeros(2 * n_nodes), [-np.inf, -np.inf, -np.inf]])
        self.node_ub = np.concatenate(
            [np.full(n_nodes, p.pos.c_max), np.full(n_nodes, p.neg.c_max), [np.inf, np.inf, np.inf]]
        )
        self.u_scale = p.current_bound_a
        self.u_lb, self.u_ub = spec.control_bounds or (-p.current_bound_a, p.current_bound_a)
        self.lam = _interval_prices(spec.prices, spec.n_intervals, spec.control_dt_s)
        n = spec.steps_per_interval
        q = n // 4
        self.sample_steps = [0, q, 2 * q, 3 * q, n]
        self.interior = [1, 2, 3]  # node boxes already bound the endpoints
        self.n_samples = len(self.sample_steps)
        self.ineq_per_interval = 2 * self.n_samples + 2 * len(self.interior) * 2 * n_nodes
        self._v_span = p.v_max - p.v_min
        self._n_nodes = n_nodes

    def rollout(self, x, u):
        return self.model.rollout(
            x,
            u,
            self.spec.integration_dt_s,
            self.spec.steps_per_interval,
            sample_steps=self.sample_steps,
        )

    def ineq(self, out, n_intervals):
        v = out["v_samples"]
        rows = [(v - self.p.v_min) / self._v_span, (self.p.v_max - v) / self._v_span]
        n = self._n_nodes
        conc = out["x_samples"][:, self.interior, : 2 * n]  # (B, 3, 2n)
        scale = np.concatenate([np.full(n, self.p.pos.c_max), np.full(n, self.p.neg.c_max)])
        c_rel = conc / scale
        b = c_rel.shape[0]
        rows.append(c_rel.reshape(b, -1))
        rows.append((1.0 - c_rel).reshape(b, -1))
        return np.concatenate(rows, axis=1)

    def objective_state(self, out, u, nodes):
        return {
            "rev_terms": -self.p.n_cells / 3600.0 * self.lam * u * out["v_int"],
            "v_int": out["v_int"],
            "l_end": nodes[-1][-1],
            "l_start": self.spec.initial_state[-1],
        }

    def objective_sums(self, state):
        return (state["rev_terms"].sum(),)

    def _value(self, rev, l_end, l_start):
        if self.spec.objective == "revenue":
            return rev
        return rev - self.p.lambda_eur_per_ah * self.p.n_cells * (l_end - l_start)

    def objective(self, state):
        return self._value(state["rev_terms"].sum(), state["l_end"], state["l_start"])

    def objective_swapped(self, state, sums, k, out_k, u_k, node_k=None):
        rev_k = -self.p.n_cells / 3600.0 * self.lam[k] * u_k * out_k["v_int"]
        return self._value(sums[0] - state["rev_terms"][k] + rev_k, state["l_end"], state["l_start"])

    def terminal_gradient(self, x_terminal):
        g = np.zeros(self.state_dim)
        if self.spec.objective == "profit":
            g[-1] = -self.p.lambda_eur_per_ah * self.p.n_cells
        return g

    def objective_scale(self):
        return max(
            1e-6,
            self.p.n_cells * float(np.mean(np.abs(self.lam))) * self.u_scale * 3.7 * self.spec.horizon_s / 3600.0 * 0.25,
        )


_ADAPTERS = {"bucket": _BucketShooting, "ecm": _EcmShooting, "spm": _SpmShooting}


# ----------------------------------------------------------------------
# the assembled instance


class ShootingNlp:
    """Multiple-shooting transcription with block finite-difference derivatives.

    Scaled decision vector: all shooting nodes (the first pinned to the
    initial state through equal bounds) followed by the per-interval
    controls. Shooting defects are equalities; path samples are
    inequalities; node state boxes and control limits are variable
    bounds.
    """

    def __init__(self, spec: OcpSpec):
        self.spec = spec
        self.adapter = _ADAPTERS[spec.model](spec)
        ad = self.adapter
        self.n_int = spec.n_intervals
        self.s = ad.state_dim
        self.n_vars = (self.n_int + 1) * self.s + self.n_int
        self.n_eq = self.n_int * self.s
        self.n_ineq = self.n_int * ad.ineq_per_interval
        self.obj_scale = ad.objective_scale()

        x_init = np.asarray(spec.initial_state, dtype=float)
        if x_init.shape != (self.s,):
            raise ConfigError(f"initial state must have {self.s} entries for model {spec.model!r}")

        nodes = self._zero_control_nodes(x_init)
        self._nodes0 = nodes
        self.x0 = self.pack(nodes, np.zeros(self.n_int))

        lb_nodes = np.tile(ad.node_lb / ad.x_scale, self.n_int + 1)
        ub_nodes = np.tile(ad.node_ub / ad.x_scale, self.n_int + 1)
        lb_nodes[: self.s] = ub_nodes[: self.s] = x_init / ad.x_scale  # pin the initial node
        self.lb = np.concatenate([lb_nodes, np.full(self.n_int, ad.u_lb / ad.u_scale)])
        self.ub = np.concatenate([ub_nodes, np.full(self.n_int, ad.u_ub / ad.u_scale)])

        # defect block sparsity: rows k touch node k, node k+1, control k
        self.sparsity = [(k, k) for k in range(self.n_int)] + [(k, k + 1) for k in range(self.n_int)]

    # -- packing helpers ------------------------------------------------

    def pack(self, nodes: np.ndarray, controls: np.ndarray) -> np.ndarray:
        ad = self.adapter
        return np.concatenate([(nodes / ad.x_scale).ravel(), controls / ad.u_scale])

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ad = self.adapter
        n_node_vars = (self.n_int + 1) * self.s
        nodes = x[:n_node_vars].reshape(self.n_int + 1, self.s) * ad.x_scale
        controls = x[n_node_vars:] * ad.u_scale
        return nodes, controls

    def unpack_controls(self, x: np.ndarray) -> ControlProfile:
        _, u = self.unpack(x)
        return ControlProfile(u, kind=self.adapter.control_kind, dt_s=self.spec.control_dt_s)

    def _zero_control_nodes(self, x_init: np.ndarray) -> np.ndarray:
        """Dynamics-feasible initial guess: rest the battery."""
        ad = self.adapter
        nodes = np.empty((self.n_int + 1, self.s))
        nodes[0] = x_init
        x = x_init[None, :]
        for k in range(self.n_int):
            out = ad.rollout(x, np.zeros(1))
            x = out["x_end"]
            nodes[k + 1] = x[0]
        return nodes

    # -- evaluation ------------------------------------------------------

    def eval_all(self, x: np.ndarray, need_grad: bool) -> EvalResult:
        if not need_grad:
            f, c, g = self._eval_plain(x)
            return EvalResult(f=f, c_eq=c, g_ineq=g)
        return self._eval_grad(x)

    def objective(self, x: np.ndarray) -> float:
        return self._eval_plain(x)[0]

    def constraints(self, x: np.ndarray):
        _, c, g = self._eval_plain(x)
        return c, g

    def derivatives(self, x: np.ndarray):
        res = self._eval_grad(x)
        return res.grad_f, res.j_eq, res.j_ineq

    def physical_objective(self, x: np.ndarray) -> float:
        """Optimized objective in EUR (revenue or profit per the spec)."""
        return -self.objective(x) * self.obj_scale

    def _eval_plain(self, x):
        ad = self.adapter
        nodes, u = self.unpack(x)
        out = ad.rollout(nodes[:-1], u)
        defects = ((out["x_end"] - nodes[1:]) / ad.x_scale).ravel()
        g = ad.ineq(out, self.n_int).ravel()
        state = ad.objective_state(out, u, nodes)
        f = -ad.objective(state) / self.obj_scale
        return f, defects, g

    def _eval_grad(self, x) -> EvalResult:
        ad = self.adapter
        k_int, s = self.n_int, self.s
        nodes, u = self.unpack(x)
        n_pert = 2 * (s + 1)
        m = k_int * (1 + n_pert)

        # absolute perturbations per block and variable, scaled space
        x_scaled = nodes[:-1] / ad.x_scale
        u_scaled = u / ad.u_scale
        h = _FD_STEP * np.maximum(1.0, np.abs(np.concatenate([x_scaled, u_scaled[:, None]], axis=1)))  # (K, s+1)

        xb = np.empty((m, s))
        ub = np.empty(m)
        xb[:k_int] = nodes[:-1]
        ub[:k_int] = u
        for v in range(s + 1):
            base = k_int * (1 + 2 * v)
            for sign, offset in ((+1.0, 0), (-1.0, k_int)):
                rows = slice(base + offset, base + offset + k_int)
                xb[rows] = nodes[:-1]
                ub[rows] = u
                if v < s:
                    xb[rows, v] += sign * h[:, v] * ad.x_scale[v]
                else:
                    ub[rows] += sign * h[:, s] * ad.u_scale

        out = ad.rollout(xb, ub)
        x_end = out["x_end"]
        g_all = ad.ineq(out, self.n_int)
        q = ad.ineq_per_interval

        defects = ((x_end[:k_int] - nodes[1:]) / ad.x_scale).ravel()
        g = g_all[:k_int].ravel()

        nominal_out = {key: val[:k_int] for key, val in out.items()}
        state = ad.objective_state(nominal_out, u, nodes)
        sums = ad.objective_sums(state)
        f = -ad.objective(state) / self.obj_scale

        grad_f = np.zeros(self.n_vars)
        n_node_vars = (k_int + 1) * s

        # defect jacobian entries: per block, d defect_k / d (node_k, u_k)
        data_blocks = np.empty((k_int, s, s + 1))
        ineq_blocks = np.empty((k_int, q, s + 1)) if q else None
        for v in range(s + 1):
            base = k_int * (1 + 2 * v)
            plus = slice(base, base + k_int)
            minus = slice(base + k_int, base + 2 * k_int)
            dx = (x_end[plus] - x_end[minus]) / (2.0 * h[:, v, None]) / ad.x_scale
            data_blocks[:, :, v] = dx
            if q:
                ineq_blocks[:, :, v] = (g_all[plus] - g_all[minus]) / (2.0 * h[:, v, None])

            # objective derivative via swapped per-interval contributions
            for sign_idx, rows in ((0, plus), (1, minus)):
                sign = 1.0 if sign_idx == 0 else -1.0
                for k in range(k_int):
                    row = base + sign_idx * k_int + k
                    out_k = {key: val[row] for key, val in out.items()}
                    u_k = ub[row]
                    f_swapped = ad.objective_swapped(state, sums, k, out_k, u_k, node_k=xb[row])
                    col = k * s + v if v < s else n_node_vars + k
                    grad_f[col] += sign * (-f_swapped / self.obj_scale) / (2.0 * h[k, v])

        # direct objective dependence on the terminal node (minimize form)
        term = ad.terminal_gradient(nodes[-1]) * ad.x_scale / self.obj_scale
        grad_f[k_int * s : (k_int + 1) * s] -= term

        j_eq = self._assemble_jeq(data_blocks)
        j_ineq = self._assemble_jineq(ineq_blocks) if q else sp.csr_matrix((0, self.n_vars))
        return EvalResult(f=f, c_eq=defects, g_ineq=g, grad_f=grad_f, j_eq=j_eq, j_ineq=j_ineq)

    def _assemble_jeq(self, blocks: np.ndarray):
        k_int, s = self.n_int, self.s
        n_node_vars = (k_int + 1) * s
        rows, cols, data = [], [], []
        k_idx = np.arange(k_int)

        # node-k and control-k columns
        for v in range(s + 1):
            col = (k_idx * s + v) if v < s else (n_node_vars + k_idx)
            for j in range(s):
                rows.append(k_idx * s + j)
                cols.append(col)
                data.append(blocks[:, j, v])
        # -identity against node k+1
        for j in range(s):
            rows.append(k_idx * s + j)
            cols.append((k_idx + 1) * s + j)
            data.append(np.full(k_int, -1.0))

        return sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_eq, self.n_vars),
        ).tocsr()

    def _assemble_jineq(self, blocks: np.ndarray):
        k_int, s = self.n_int, self.s
        q = self.adapter.ineq_per_interval
        n_node_vars = (k_int + 1) * s
        rows, cols, data = [], [], []
        k_idx = np.arange(k_int)
        for v in range(s + 1):
            col = (k_idx * s + v) if v < s else (n_node_vars + k_idx)
            for j in range(q):
                rows.append(k_idx * q + j)
                cols.append(col)
                data.append(blocks[:, j, v])
        return sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_ineq, self.n_vars),
        ).tocsr()


def assemble_nlp(spec: OcpSpec) -> ShootingNlp:
    """Build the multiple-shooting transcription of the given problem."""
    return ShootingNlp(spec)


def solve_nlp(
    nlp: ShootingNlp,
    feas_tol: float = 1e-8,
    kkt_tol: float = 1e-6,
    max_iter: int = 3000,
    inner_maxiter: int = 120,
    warm_start: np.ndarray | None = None,
    warm_mu: np.ndarray | None = None,
    warm_nu: np.ndarray | None = None,
    log=None,
) -> tuple[ControlProfile, SolveReport, AugLagResult]:
    """Solve the transcription; returns the control profile and a report.

    The augmented-Lagrangian result is also returned so callers can
    warm-start a related solve from its point and multipliers.
    """
    options = AugLagOptions(
        feas_tol=feas_tol,
        kkt_tol=kkt_tol,
        max_inner_total=max_iter,
        inner_maxiter=inner_maxiter,
    )
    x0 = nlp.x0 if warm_start is None else np.asarray(warm_start, dtype=float)
    res = minimize_auglag(nlp.eval_all, x0, nlp.lb, nlp.ub, options, mu0=warm_mu, nu0=warm_nu, log=log)
    profile = nlp.unpack_controls(res.x)
    report = SolveReport(
        status=res.status,
        objective_eur=-res.objective * nlp.obj_scale,
        max_defect=res.max_eq_violation,
        max_violation=res.max_ineq_violation,
        iterations=res.inner_iterations,
        wall_time_s=res.wall_time_s,
        kkt_residual=res.kkt_residual,
    )
    return profile, report, res


# ----------------------------------------------------------------------
# bucket fast path: linear program


def solve_bucket_lp(spec: OcpSpec) -> tuple[ControlProfile, SolveReport]:
    """Exact LP dispatch for the tank model.

    Charging and discharging power are split into non-negative parts,
    |P| <= m tracks the peak level, and the SoC recursion becomes
    cumulative-sum inequalities. Optimality is certified through the
    dual: the duality gap must close to 1e-9 relative.
    """
    if spec.model != "bucket":
        raise ConfigError("LP path only handles the bucket model")
    p: BucketParams = spec.params
    t0 = time.perf_counter()
    k_int = spec.n_intervals
    lam = _interval_prices(spec.prices, k_int, spec.control_dt_s)
    dt_h = spec.control_dt_s / 3600.0
    lo, hi = spec.control_bounds or (-p.power_bound_w, p.power_bound_w)
    bound = max(abs(lo), abs(hi))
    if not np.isfinite(bound) or bound <= 0:
        raise ConfigError("bucket LP needs a finite, nonzero power bound")
    z0 = float(np.asarray(spec.initial_state).ravel()[0])

    nc = p.n_cells
    include_cost = spec.objective == "profit"
    cost_t = p.lambda_eur_per_wh * nc * p.k_throughput_wh_per_wh * dt_h if include_cost else 0.0
    cost_p = p.lambda_eur_per_wh * nc * p.k_power_wh_per_w if include_cost else 0.0

    # variables: [charge part (K), discharge part (K), peak m]
    n = 2 * k_int + 1
    c = np.concatenate([nc * lam * dt_h + cost_t, -nc * lam * dt_h + cost_t, [cost_p]])

    tri = np.tril(np.ones((k_int, k_int))) * (spec.control_dt_s / (p.e_wh * 3600.0))
    a_soc = np.hstack([tri, -tri, np.zeros((k_int, 1))])
    a_ub = np.vstack(
        [
            a_soc,  # z0 + cum <= 1
            -a_soc,  # -(z0 + cum) <= 0
            np.hstack([np.eye(k_int), np.eye(k_int), -np.ones((k_int, 1))]),  # pp + pm <= m
        ]
    )
    b_ub = np.concatenate([np.full(k_int, 1.0 - z0), np.full(k_int, z0), np.zeros(k_int)])
    bounds = [(0.0, min(hi if hi > 0 else 0.0, bound))] * k_int + [(0.0, min(-lo if lo < 0 else 0.0, bound))] * k_int + [
        (0.0, bound)
    ]

    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 3:
        raise ConfigError("bucket LP unbounded; a finite power bound is required")
    if not res.success:
        report = SolveReport(
            status="infeasible",
            objective_eur=float("nan"),
            max_defect=0.0,
            max_violation=float("nan"),
            iterations=int(getattr(res, "nit", 0)),
            wall_time_s=time.perf_counter() - t0,
        )
        return ControlProfile(np.zeros(k_int), kind="power", dt_s=spec.control_dt_s), report

    x = res.x
    power = x[:k_int] - x[k_int : 2 * k_int]
    profile = ControlProfile(power, kind="power", dt_s=spec.control_dt_s)

    # duality gap from the HiGHS multipliers
    dual = float(b_ub @ res.ineqlin.marginals)
    lower = np.array([b[0] for b in bounds])
    upper = np.array([b[1] for b in bounds])
    dual += float(lower @ res.lower.marginals + upper @ res.upper.marginals)
    gap = abs(res.fun - dual) / max(1.0, abs(res.fun))

    soc = z0 + np.cumsum(power) * spec.control_dt_s / (p.e_wh * 3600.0)
    max_violation = float(max(np.max(soc - 1.0, initial=0.0), np.max(-soc, initial=0.0)))

    report = SolveReport(
        status="optimal" if gap <= 1e-9 else "max_iter",
        objective_eur=-res.fun,
        max_defect=0.0,
        max_violation=max_violation,
        iterations=int(getattr(res, "nit", 0)),
        wall_time_s=time.perf_counter() - t0,
        duality_gap=gap,
    )
    return profile, report
