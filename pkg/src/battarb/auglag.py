"""Augmented-Lagrangian solver for box-constrained NLPs.

Classic method of multipliers: equality constraints enter through
linear multiplier terms plus a quadratic penalty, inequalities through
the Powell-Hestenes-Rockafellar squared-hinge form, and each outer
iteration minimizes the resulting box-constrained subproblem with
limited-memory BFGS. The penalty weight only grows when feasibility
stalls, and multipliers can be warm-started between related solves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.linalg import lsqr


@dataclass(frozen=True)
class AugLagOptions:
    """Penalty growth stops at rho_max: beyond that the subproblem
    conditioning defeats limited-memory quasi-Newton, so feasibility is
    left to the multiplier updates, which need accurate inner solves."""

    feas_tol: float = 1e-8
    kkt_tol: float = 1e-6
    max_inner_total: int = 3000  # cumulative quasi-Newton iterations
    max_outer: int = 40
    rho0: float = 100.0
    rho_growth: float = 5.0
    rho_max: float = 1e5
    inner_maxiter: int = 150  # first outer; later ones get more
    lbfgs_memory: int = 20


@dataclass
class EvalResult:
    f: float
    c_eq: np.ndarray
    g_ineq: np.ndarray
    grad_f: np.ndarray | None = None
    j_eq: object | None = None  # scipy.sparse, n_eq x n
    j_ineq: object | None = None


@dataclass
class AugLagResult:
    x: np.ndarray
    status: str  # optimal | max_iter | infeasible
    objective: float
    max_eq_violation: float
    max_ineq_violation: float
    kkt_residual: float
    inner_iterations: int
    outer_iterations: int
    mu: np.ndarray = field(repr=False, default=None)
    nu: np.ndarray = field(repr=False, default=None)
    wall_time_s: float = 0.0


def _feasibility(c_eq: np.ndarray, g_ineq: np.ndarray) -> tuple[float, float]:
    eq = float(np.max(np.abs(c_eq))) if c_eq.size else 0.0
    ineq = float(max(0.0, -np.min(g_ineq))) if g_ineq.size else 0.0
    return eq, ineq


def minimize_auglag(
    eval_all,
    x0: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    options: AugLagOptions | None = None,
    mu0: np.ndarray | None = None,
    nu0: np.ndarray | None = None,
    log=None,
) -> AugLagResult:
    """Minimize ``f`` s.t. ``c_eq = 0``, ``g_ineq >= 0``, ``lb <= x <= ub``.

    ``eval_all(x, need_grad)`` returns an :class:`EvalResult`; gradients
    are only requested when ``need_grad`` is true. ``log`` is an optional
    callable receiving one dict per outer iteration.
    """
    opts = options or AugLagOptions()
    t0 = time.perf_counter()

    x = np.clip(np.asarray(x0, dtype=float), lb, ub)
    probe = eval_all(x, False)
    n_eq, n_ineq = probe.c_eq.size, probe.g_ineq.size
    mu = np.zeros(n_eq) if mu0 is None else np.asarray(mu0, dtype=float).copy()
    nu = np.zeros(n_ineq) if nu0 is None else np.asarray(nu0, dtype=float).copy()
    rho = opts.rho0

    cache = {"x": None, "res": None}

    def eval_cached(x):
        if cache["x"] is not None and np.array_equal(cache["x"], x):
            return cache["res"]
        res = eval_all(x, True)
        cache["x"] = x.copy()
        cache["res"] = res
        return res

    def al_grad(res, mu, nu, rho):
        shifted = mu - rho * res.c_eq
        grad = res.grad_f - res.j_eq.T.dot(shifted) if n_eq else res.grad_f.copy()
        if n_ineq:
            act = np.maximum(0.0, nu - rho * res.g_ineq)
            grad = grad - res.j_ineq.T.dot(act)
        return grad

    inner_total = 0
    best = None  # (is_feasible, key, x, f, feas)
    feas_prev = np.inf
    stall = 0
    status = "max_iter"
    kkt = np.inf
    res = probe

    for outer in range(opts.max_outer):

        def fun(x, mu=mu, nu=nu, rho=rho):
            r = eval_cached(x)
            value = r.f
            if n_eq:
                value += -mu @ r.c_eq + 0.5 * rho * (r.c_eq @ r.c_eq)
            if n_ineq:
                act = np.maximum(0.0, nu - rho * r.g_ineq)
                value += (act @ act - nu @ nu) / (2.0 * rho)
            return value, al_grad(r, mu, nu, rho)

        pgtol = max(0.3 * opts.kkt_tol, 3e-3 * 0.25**outer)
        budget = min(opts.inner_maxiter + 75 * outer, 600, opts.max_inner_total - inner_total)
        if budget <= 0:
            status = "max_iter"
            break
        sol = minimize(
            fun,
            x,
            jac=True,
            method="L-BFGS-B",
            bounds=np.stack([lb, ub], axis=1),
            options={
                "maxiter": budget,
                "maxcor": opts.lbfgs_memory,
                "ftol": 1e-18,
                "gtol": pgtol,
                "maxls": 40,
            },
        )
        inner_total += sol.nit
        x = sol.x

        res = eval_cached(x)
        eq_v, ineq_v = _feasibility(res.c_eq, res.g_ineq)
        feas = max(eq_v, ineq_v)

        # first-order multiplier update
        if n_eq:
            mu = mu - rho * res.c_eq
        if n_ineq:
            nu = np.maximum(0.0, nu - rho * res.g_ineq)

        grad_lag = al_grad(res, mu, nu, rho)  # equals the Lagrangian gradient post-update
        kkt = float(np.max(np.abs(x - np.clip(x - grad_lag, lb, ub)))) if x.size else 0.0

        # Near feasibility the first-order updates can leave stale
        # equality multipliers while the iterate barely moves; a least
        # squares fit of the free-variable stationarity system repairs
        # the certificate (and the next subproblem) cheaply.
        if n_eq and feas <= 1e-5 and kkt > opts.kkt_tol:
            free = (x > lb + 1e-12) & (x < ub - 1e-12)
            rhs = res.grad_f.copy()
            if n_ineq:
                rhs -= res.j_ineq.T.dot(nu)
            jt_free = res.j_eq.T.tocsr()[free]
            fit = lsqr(jt_free, rhs[free], atol=1e-12, btol=1e-12)
            mu_ls = fit[0]
            grad_ls = res.grad_f - res.j_eq.T.dot(mu_ls)
            if n_ineq:
                grad_ls -= res.j_ineq.T.dot(nu)
            kkt_ls = float(np.max(np.abs(x - np.clip(x - grad_ls, lb, ub))))
            if kkt_ls < kkt:
                mu = mu_ls
                kkt = kkt_ls

        key = (0, res.f) if feas <= opts.feas_tol else (1, feas)
        if best is None or key < best[0]:
            best = (key, x.copy(), res.f, feas, mu.copy(), nu.copy())

        if log is not None:
            log(
                {
                    "outer": outer,
                    "inner": sol.nit,
                    "objective": res.f,
                    "feasibility": feas,
                    "kkt": kkt,
                    "rho": rho,
                }
            )

        if feas <= opts.feas_tol and kkt <= opts.kkt_tol:
            status = "optimal"
            break
        if inner_total >= opts.max_inner_total:
            status = "max_iter"
            break
        if feas > 0.25 * feas_prev:
            if rho >= opts.rho_max:
                stall += 1
                if stall >= 2 and feas > 1e-4:
                    status = "infeasible"
                    break
            rho = min(rho * opts.rho_growth, opts.rho_max)
        else:
            stall = 0
        feas_prev = feas

    # prefer the best recorded iterate when the final one is worse
    if best is not None:
        final_key = (
            (0, res.f) if max(_feasibility(res.c_eq, res.g_ineq)) <= opts.feas_tol else (1, max(_feasibility(res.c_eq, res.g_ineq)))
        )
        if best[0] < final_key:
            x = best[1]
            res = eval_cached(x)
            mu, nu = best[4], best[5]

    eq_v, ineq_v = _feasibility(res.c_eq, res.g_ineq)
    return AugLagResult(
        x=x,
        status=status,
        objective=res.f,
        max_eq_violation=eq_v,
        max_ineq_violation=ineq_v,
        kkt_residual=kkt,
        inner_iterations=inner_total,
        outer_iterations=outer + 1,
        mu=mu,
        nu=nu,
        wall_time_s=time.perf_counter() - t0,
    )
