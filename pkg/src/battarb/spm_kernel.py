"""Compiled inner loop for the particle-model rollout.

Same math as the numpy batch path in :mod:`battarb.spm`, specialized to
one trajectory per thread so the forward-Euler loop runs without array
temporaries. The numpy implementation stays the reference; a test pins
the two paths together.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap

    prange = range


@njit(cache=True, parallel=True, fastmath=False)
def rollout_kernel(
    x,  # (B, 13) in/out, modified in place
    cur,  # (B,) applied current, charge-positive
    dt,
    n_steps,
    side_reaction,
    # discretization
    d1_pos,  # (n, n)
    d1_neg,
    inv_r_pos,  # (n,)
    inv_r_neg,
    # electrode constants: radius-derived surface, capacities, transport
    cmax_pos,
    cmax_neg,
    d_ref_pos,
    e_d_pos,
    d_ref_neg,
    e_d_neg,
    k_ref_pos,
    e_k_pos,
    k_ref_neg,
    e_k_neg,
    area_pos,
    area_neg,
    spec_surf_neg,
    ocv_pos_x,
    ocv_pos_y,
    ocv_neg_x,
    ocv_neg_y,
    # shared
    alpha_ct,
    nf,  # n_electrons * F
    c_el,
    docv_dt,
    r_batt,
    r_sei_per_m,
    # SEI set
    nf_sei,
    k_sei_ref,
    e_k_sei,
    d_sei_ref,
    e_d_sei,
    sei_ref_v,
    sei_growth_per_amp,  # M / (n_sei F rho_sei)
    dl_per_amp,  # area_neg / 3600
    # thermal
    heat_capacity,
    h_area,
    t_env,
    t_ref,
    r_gas,
    # outputs
    v_int,  # (B,)
    sample_steps,  # (S,) int64, may include n_steps
    v_samples,  # (B, S) or (B, 0)
    x_samples,  # (B, S, 13) or (B, 0, 13)
    v_steps,  # (B, n_steps) or (B, 0)
    track,  # flags: record_v, track_violations
    viol_out,  # (B, 3): v_low, v_high, c_excursion
):
    b_total = x.shape[0]
    n = d1_pos.shape[0]
    record_v = track[0] != 0
    track_viol = track[1] != 0
    n_samples = sample_steps.shape[0]

    sqrt_cel = np.sqrt(c_el)
    symmetric = alpha_ct == 0.5

    for b in prange(b_total):
        i_app = cur[b]
        i_dis = -i_app
        g = np.empty(2 * n)
        dg = np.empty(2 * n)
        v_low = 1e30
        v_high = -1e30
        c_exc = 0.0
        eta_warm = 0.0
        have_warm = False

        for step in range(n_steps + 1):
            t = x[b, 2 * n]
            delta = x[b, 2 * n + 1]
            inv_t = 1.0 / t

            d_pos = d_ref_pos * np.exp((e_d_pos / r_gas) * (inv_t - 1.0 / t_ref))
            d_neg = d_ref_neg * np.exp((e_d_neg / r_gas) * (inv_t - 1.0 / t_ref))
            k_pos = k_ref_pos * np.exp((e_k_pos / r_gas) * (inv_t - 1.0 / t_ref))
            k_neg = k_ref_neg * np.exp((e_k_neg / r_gas) * (inv_t - 1.0 / t_ref))

            cs_pos = x[b, n - 1]
            if cs_pos < 1e-9 * cmax_pos:
                cs_pos = 1e-9 * cmax_pos
            elif cs_pos > (1.0 - 1e-9) * cmax_pos:
                cs_pos = (1.0 - 1e-9) * cmax_pos
            cs_neg = x[b, 2 * n - 1]
            if cs_neg < 1e-9 * cmax_neg:
                cs_neg = 1e-9 * cmax_neg
            elif cs_neg > (1.0 - 1e-9) * cmax_neg:
                cs_neg = (1.0 - 1e-9) * cmax_neg

            if symmetric:
                j0_pos = nf * k_pos * sqrt_cel * np.sqrt(cs_pos * (cmax_pos - cs_pos))
                j0_neg = nf * k_neg * sqrt_cel * np.sqrt(cs_neg * (cmax_neg - cs_neg))
            else:
                j0_pos = (
                    nf * k_pos * cs_pos**alpha_ct * c_el ** (1.0 - alpha_ct) * (cmax_pos - cs_pos) ** (1.0 - alpha_ct)
                )
                j0_neg = (
                    nf * k_neg * cs_neg**alpha_ct * c_el ** (1.0 - alpha_ct) * (cmax_neg - cs_neg) ** (1.0 - alpha_ct)
                )

            j_pos = i_dis / area_pos
            j_neg_app = -i_dis / area_neg

            thermal_v = r_gas * t / nf
            eta_pos = -2.0 * thermal_v * np.arcsinh(j_pos / (2.0 * j0_pos))

            if side_reaction:
                k_sei = k_sei_ref * np.exp((e_k_sei / r_gas) * (inv_t - 1.0 / t_ref))
                d_sei = d_sei_ref * np.exp((e_d_sei / r_gas) * (inv_t - 1.0 / t_ref))
                ocv_neg_s = np.interp(cs_neg / cmax_neg, ocv_neg_x, ocv_neg_y)
                denom = 1.0 / (nf_sei * k_sei * np.exp(-nf_sei * (ocv_neg_s - sei_ref_v) * inv_t / r_gas)) + delta / (
                    nf_sei * d_sei
                )
                inv_thermal = nf / (r_gas * t)
                if have_warm:
                    eta = eta_warm
                else:
                    eta = -2.0 * thermal_v * np.arcsinh(j_neg_app / (2.0 * j0_neg))
                i_sei = np.exp(-inv_thermal * eta) / denom
                resid_prev = 1e300
                damping = 1.0
                for _ in range(50):
                    resid = -2.0 * j0_neg * np.sinh(0.5 * inv_thermal * eta) + i_sei - j_neg_app
                    worst = abs(resid)
                    if worst <= 1e-10:
                        break
                    if worst > 0.5 * resid_prev:
                        damping = max(0.25, 0.5 * damping)
                    resid_prev = worst
                    eta_next = -2.0 * thermal_v * np.arcsinh((j_neg_app - i_sei) / (2.0 * j0_neg))
                    eta = eta + damping * (eta_next - eta)
                    i_sei = np.exp(-inv_thermal * eta) / denom
                eta_neg = eta
                eta_warm = eta
                have_warm = True
            else:
                i_sei = 0.0
                eta_neg = -2.0 * thermal_v * np.arcsinh(j_neg_app / (2.0 * j0_neg))

            v = (
                np.interp(cs_pos / cmax_pos, ocv_pos_x, ocv_pos_y)
                - np.interp(cs_neg / cmax_neg, ocv_neg_x, ocv_neg_y)
                + (t - t_ref) * docv_dt
                - (eta_neg - eta_pos)
                - (r_batt + r_sei_per_m * delta) * i_dis
            )

            for s in range(n_samples):
                if sample_steps[s] == step:
                    v_samples[b, s] = v
                    for j in range(2 * n + 3):
                        x_samples[b, s, j] = x[b, j]

            if track_viol:
                if v < v_low:
                    v_low = v
                if v > v_high:
                    v_high = v
                for j in range(n):
                    rel = x[b, j] / cmax_pos
                    if -rel > c_exc:
                        c_exc = -rel
                    if rel - 1.0 > c_exc:
                        c_exc = rel - 1.0
                    rel = x[b, n + j] / cmax_neg
                    if -rel > c_exc:
                        c_exc = -rel
                    if rel - 1.0 > c_exc:
                        c_exc = rel - 1.0

            if step == n_steps:
                break

            if record_v:
                v_steps[b, step] = v
            v_int[b] += v * dt

            # spherical diffusion in gradient form, both electrodes
            for j in range(n):
                acc_p = 0.0
                acc_n = 0.0
                for m in range(n):
                    acc_p += d1_pos[j, m] * x[b, m]
                    acc_n += d1_neg[j, m] * x[b, n + m]
                g[j] = acc_p
                g[n + j] = acc_n
            g[0] = 0.0
            g[n] = 0.0
            g[n - 1] = j_pos / (nf * d_pos)
            g[2 * n - 1] = j_neg_app / (nf * d_neg)
            for j in range(n):
                acc_p = 0.0
                acc_n = 0.0
                for m in range(n):
                    acc_p += d1_pos[j, m] * g[m]
                    acc_n += d1_neg[j, m] * g[n + m]
                dg[j] = acc_p
                dg[n + j] = acc_n

            sink = i_sei * spec_surf_neg / nf
            for j in range(n):
                m_p = dg[0] if j == 0 else g[j] * inv_r_pos[j]
                m_n = dg[n] if j == 0 else g[n + j] * inv_r_neg[j]
                x[b, j] += dt * d_pos * (dg[j] + 2.0 * m_p)
                x[b, n + j] += dt * (d_neg * (dg[n + j] + 2.0 * m_n) - sink)

            heat = (
                i_dis * i_dis * r_batt
                + i_dis * (eta_neg - eta_pos)
                + i_dis * t * docv_dt
                - h_area * (t - t_env)
            )
            x[b, 2 * n] += dt * heat / heat_capacity
            x[b, 2 * n + 1] += dt * i_sei * sei_growth_per_amp
            x[b, 2 * n + 2] += dt * i_sei * dl_per_amp

        if track_viol:
            viol_out[b, 0] = v_low
            viol_out[b, 1] = v_high
            viol_out[b, 2] = c_exc
