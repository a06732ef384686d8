import math
from dataclasses import replace

import numpy as np
import pytest

from battarb.errors import KineticsError
from battarb.spm import (
    FARADAY,
    R_GAS,
    SpmModel,
    SpmState,
    arrhenius,
    butler_volmer_current,
    butler_volmer_overpotential,
    exchange_current_density,
    sei_current_density,
)

from oracles import fd_spherical_relaxation


@pytest.fixture(scope="module")
def model(spm_params):
    return SpmModel(spm_params)


class TestArrhenius:
    def test_identity_at_reference(self):
        assert arrhenius(3.5, 5e4, 300.0, 300.0) == pytest.approx(3.5, rel=1e-15)

    def test_zero_activation_energy(self):
        for t in (200.0, 300.0, 450.0):
            assert arrhenius(2.0, 0.0, t, 300.0) == 2.0

    def test_direct_substitution(self):
        # E = R makes the exponent (1/T - 1/T_ref) itself
        out = arrhenius(1.0, R_GAS, 600.0, 300.0)
        assert out == pytest.approx(math.exp(1.0 / 600.0 - 1.0 / 300.0), rel=1e-14)

    def test_printed_sign_convention(self):
        # positive E: the factor decreases as T rises above T_ref;
        # negative E does the opposite. No chemistry assumed here.
        ts = np.linspace(250.0, 400.0, 7)
        pos = arrhenius(1.0, 4e4, ts, 300.0)
        neg = arrhenius(1.0, -4e4, ts, 300.0)
        assert np.all(np.diff(pos) < 0)
        assert np.all(np.diff(neg) > 0)
        assert arrhenius(1.0, 4e4, 300.0, 300.0) == pytest.approx(1.0)


class TestExchangeCurrent:
    C_MAX = 3e4

    def j0(self, c):
        return exchange_current_density(c, self.C_MAX, 1000.0, 2e-11, 0.5, 1)

    def test_vanishes_at_empty_surface(self):
        assert self.j0(0.0) == 0.0

    def test_vanishes_at_saturated_surface(self):
        assert self.j0(self.C_MAX) == 0.0

    def test_domain_error_outside_window(self):
        with pytest.raises(KineticsError):
            self.j0(-1.0)
        with pytest.raises(KineticsError):
            self.j0(self.C_MAX * 1.001)

    def test_maximum_at_half_concentration(self):
        # grid search oracle over the surface concentration
        grid = np.linspace(0.0, self.C_MAX, 2001)
        values = self.j0(grid)
        assert grid[np.argmax(values)] == pytest.approx(self.C_MAX / 2, rel=1e-3)


class TestButlerVolmer:
    def test_zero_current_zero_overpotential(self):
        assert butler_volmer_overpotential(0.0, 1.0, 298.15) == 0.0

    def test_cathodic_current_needs_negative_overpotential(self):
        eta = butler_volmer_overpotential(0.5, 1.0, 298.15)
        assert eta < 0

    def test_round_trip_residual_symmetric(self):
        for j in (-3.0, -0.1, 0.2, 5.0):
            eta = butler_volmer_overpotential(j, 1.2, 310.0, 0.5, 1)
            back = butler_volmer_current(eta, 1.2, 310.0, 0.5, 1)
            assert back == pytest.approx(j, rel=1e-12, abs=1e-12 * 1.2)

    def test_round_trip_residual_asymmetric(self):
        for j in (-2.0, 0.7):
            eta = butler_volmer_overpotential(j, 0.8, 298.15, alpha_ct=0.4)
            back = 0.8 * (
                math.exp(-0.4 * FARADAY * eta / (R_GAS * 298.15))
                - math.exp(0.6 * FARADAY * eta / (R_GAS * 298.15))
            )
            assert back == pytest.approx(j, rel=1e-11, abs=1e-12 * 0.8)

    def test_singular_kinetics_rejected(self):
        with pytest.raises(KineticsError):
            butler_volmer_overpotential(1.0, 0.0, 298.15)


class TestSeiCurrent:
    def test_thick_film_chokes_the_reaction(self, spm_params):
        thin = sei_current_density(0.0, 0.1, 5e-9, 298.15, spm_params)
        thick = sei_current_density(0.0, 0.1, 5e-3, 298.15, spm_params)
        assert thick < thin * 1e-4
        huge = sei_current_density(0.0, 0.1, 5e3, 298.15, spm_params)
        assert huge == pytest.approx(0.0, abs=1e-15)

    def test_monotone_in_charging_overpotential(self, spm_params):
        etas = np.linspace(0.05, -0.15, 9)
        rates = [sei_current_density(e, 0.1, 5e-9, 298.15, spm_params) for e in etas]
        assert all(b > a for a, b in zip(rates, rates[1:]))

    def test_transport_limited_scaling_with_d_sei(self, spm_params):
        # pick a film thick enough that transport dominates kinetics 20x
        p = spm_params
        t = 298.15
        term_kinetic = 1.0 / (
            p.sei.n_sei * FARADAY * p.sei.k_ref * math.exp(-p.sei.n_sei * FARADAY * (0.1 - 0.4) / (R_GAS * t))
        )
        delta = 20.0 * term_kinetic * p.sei.n_sei * FARADAY * p.sei.d_ref
        base = sei_current_density(0.0, 0.1, delta, t, p)
        doubled_d = replace(p, sei=replace(p.sei, d_ref=2 * p.sei.d_ref))
        assert sei_current_density(0.0, 0.1, delta, t, doubled_d) == pytest.approx(2 * base, rel=0.05)

    def test_positive_film_required(self, spm_params):
        with pytest.raises(ValueError):
            sei_current_density(0.0, 0.1, 0.0, 298.15, spm_params)


class TestRhs:
    def test_equilibrium_state_is_stationary(self, model):
        state = model.initial_state(0.5)
        no_side = SpmModel(model.params, side_reaction=False)
        dx = no_side.rhs(state, 0.0)
        # each channel stationary relative to its own magnitude
        scale = np.maximum(np.abs(state.as_vector()), 1.0)
        assert np.all(np.abs(dx) <= 1e-12 * scale)

    def test_flux_free_conservation_with_gradient(self, model):
        state = model.initial_state(0.5)
        bumped = replace(state, c_neg=state.c_neg * np.array([1.1, 1.05, 1.0, 0.95, 0.9]))
        no_side = SpmModel(model.params, side_reaction=False)
        dx = no_side.rhs(bumped, 0.0)
        d_pos, d_neg = no_side.lithium_content_ah(dx[None, :])
        total = sum(no_side.lithium_content_ah(bumped.as_vector()))
        assert abs(float(d_pos) + float(d_neg)) < 1e-12 * total

    def test_side_reaction_grows_film_and_loss(self, model):
        dx = model.rhs(model.initial_state(0.9), 0.0)
        assert dx[11] > 0  # film thickness
        assert dx[12] > 0  # lost lithium

    def test_rest_heat_balance_sign(self, model):
        hot = replace(model.initial_state(0.5), temperature_k=model.params.thermal.t_env_k + 10.0)
        cold = replace(model.initial_state(0.5), temperature_k=model.params.thermal.t_env_k - 10.0)
        no_side = SpmModel(model.params, side_reaction=False)
        assert no_side.rhs(hot, 0.0)[10] < 0
        assert no_side.rhs(cold, 0.0)[10] > 0

    def test_directional_derivatives_are_consistent(self, model):
        # central differences at two step sizes agree: the rhs is smooth
        rng = np.random.default_rng(42)
        p = model.params
        for _ in range(10):
            x = model.initial_state(rng.uniform(0.2, 0.8)).as_vector()
            x[:5] *= rng.uniform(0.95, 1.05, 5)
            x[5:10] *= rng.uniform(0.95, 1.05, 5)
            x[10] = rng.uniform(290.0, 320.0)
            x[11] = rng.uniform(5e-9, 5e-8)
            x[12] = rng.uniform(0.0, 0.1)
            cur = rng.uniform(-p.current_bound_a, p.current_bound_a)
            v = rng.standard_normal(13) * np.maximum(np.abs(x), [1e3] * 10 + [1.0, 1e-9, 1e-3])
            scale = 1e-6

            def dd(h):
                f_p = model._rhs_batch((x + h * v)[None, :], np.array([cur]))[0]
                f_m = model._rhs_batch((x - h * v)[None, :], np.array([cur]))[0]
                return (f_p - f_m) / (2 * h)

            d1 = dd(scale)
            d2 = dd(scale / 8)
            denom = max(np.max(np.abs(d1)), np.max(np.abs(d2)), 1e-12)
            assert np.max(np.abs(d1 - d2)) / denom < 1e-5


class TestStepAndConservation:
    def test_step_contract_rejects_large_dt(self, model):
        with pytest.raises(ValueError):
            model.step(model.initial_state(0.5), 0.0, 5.01)

    def test_per_step_conservation_without_side_reaction(self, model):
        no_side = SpmModel(model.params, side_reaction=False)
        state = no_side.initial_state(0.5)
        total0 = sum(no_side.lithium_content_ah(state.as_vector()))
        for k in range(100):
            state, violated = no_side.step(state, 2.7 if k % 2 else -2.7, 5.0)
            total = sum(no_side.lithium_content_ah(state.as_vector()))
            assert abs(total - total0) < 1e-9 * total0
            assert not violated

    def test_inventory_conserved_with_side_reaction(self, model):
        state = model.initial_state(0.6)
        x = state.as_vector()
        total0 = sum(model.lithium_content_ah(x)) + x[12]
        out = model.rollout(x, np.array([1.5]), 5.0, 1440)  # 2 hours of charging
        x1 = out["x_end"][0]
        total1 = sum(model.lithium_content_ah(x1)) + x1[12]
        assert x1[12] > 0
        assert abs(total1 - total0) < 1e-9 * total0

    def test_rest_with_side_reaction_discharges_slowly(self, model):
        x = model.initial_state(0.8).as_vector()
        out = model.rollout(x, np.array([0.0]), 5.0, 2880)  # 4 hours
        assert model.soc(out["x_end"][0]) < 0.8

    def test_saturation_is_flagged(self, model):
        state = model.initial_state(0.99)
        flagged = False
        for _ in range(720):
            state, violated = model.step(state, 2.7, 5.0)
            flagged = flagged or violated
        assert flagged


class TestDiffusionFidelity:
    def test_five_node_surface_tracks_fine_grid_oracle(self, model):
        # quadratic initial bump relaxing for 10 minutes with no flux
        p = model.params.neg
        base, amp = 0.5 * p.c_max, 0.05 * p.c_max

        def c0(r):
            return base + amp * (r / p.radius_m) ** 2

        state = model.initial_state(0.5)
        state = replace(state, c_neg=c0(model.disc_neg.r))
        no_side = SpmModel(model.params, side_reaction=False)
        out = no_side.rollout(state.as_vector(), np.array([0.0]), 5.0, 120)
        surf_spm = out["x_end"][0, 9]

        d_neg = p.d_ref  # T stays at the reference during rest
        _, profile = fd_spherical_relaxation(c0, p.radius_m, d_neg, 600.0, n_r=200)
        surf_oracle = profile[-1]
        assert abs(surf_spm - surf_oracle) / surf_oracle < 0.005


class TestVoltage:
    def test_rest_voltage_is_ocv_difference(self, model):
        p = model.params
        state = model.initial_state(0.5)
        v = model.voltage(state, 0.0)
        expected = p.pos.ocv(state.c_pos[-1] / p.pos.c_max) - p.neg.ocv(state.c_neg[-1] / p.neg.c_max)
        # the resting side-reaction balance shifts the potential by microvolts
        assert v == pytest.approx(float(expected), abs=5e-4)

    def test_film_growth_raises_ohmic_drop(self, model):
        state = model.initial_state(0.5)
        thick = replace(state, sei_thickness_m=100 * state.sei_thickness_m)
        dv_thin = model.voltage(state, 2.0) - model.voltage(state, 0.0)
        dv_thick = model.voltage(thick, 2.0) - model.voltage(thick, 0.0)
        assert dv_thick > dv_thin

    def test_charge_discharge_asymmetry_is_ohmic_plus_kinetic(self, model):
        # with charge-positive current: V(I) - V(-I) = 2*(R + r*delta)*I
        # minus the antisymmetric overpotential difference
        no_side = SpmModel(model.params, side_reaction=False)
        p = model.params
        state = model.initial_state(0.5)
        i = 1.7
        v_chg = no_side.voltage(state, i)
        v_dis = no_side.voltage(state, -i)
        x = state.as_vector()[None, :]
        kin_chg = no_side._kinetics(x, np.array([i]), False)
        kin_dis = no_side._kinetics(x, np.array([-i]), False)
        eta_term = (kin_chg["eta_neg"] - kin_chg["eta_pos"]) - (kin_dis["eta_neg"] - kin_dis["eta_pos"])
        expected = 2 * (p.r_batt_ohm + p.sei.r_ohm_per_m * state.sei_thickness_m) * i - float(eta_term[0])
        assert v_chg - v_dis == pytest.approx(expected, rel=1e-9)

    def test_domain_error_at_concentration_bounds(self, model):
        state = model.initial_state(0.5)
        bad = replace(state, c_neg=np.full(5, 0.0))
        with pytest.raises(KineticsError):
            model.voltage(bad, 0.0)


class TestCapacity:
    @pytest.fixture(scope="class")
    def fresh_capacity(self, model):
        return model.measure_capacity(model.initial_state(0.5))

    def test_nameplate(self, fresh_capacity):
        assert fresh_capacity == pytest.approx(2.7, rel=0.05)

    def test_checkup_is_idempotent(self, model, fresh_capacity):
        again = model.measure_capacity(model.initial_state(0.5))
        assert abs(again - fresh_capacity) / fresh_capacity < 1e-3

    def test_checkup_starting_point_is_irrelevant(self, model, fresh_capacity):
        low = model.measure_capacity(model.initial_state(0.2))
        assert abs(low - fresh_capacity) / fresh_capacity < 2e-3

    def test_removed_lithium_shows_up_as_lost_capacity(self, model, fresh_capacity):
        delta_ah = 0.15
        aged = model.remove_lithium(model.initial_state(0.5), delta_ah)
        cap = model.measure_capacity(aged)
        assert fresh_capacity - cap == pytest.approx(delta_ah, rel=0.10)


class TestThermal:
    def test_relaxes_exponentially_toward_ambient(self, model):
        no_side = SpmModel(model.params, side_reaction=False)
        p = model.params.thermal
        state = replace(no_side.initial_state(0.5), temperature_k=p.t_env_k + 20.0)
        tau = p.heat_capacity_j_per_k / (p.h_w_per_m2_k * p.area_m2)
        n = int(round(tau / 5.0))
        out = no_side.rollout(state.as_vector(), np.array([0.0]), 5.0, n)
        t_end = out["x_end"][0, 10]
        analytic = p.t_env_k + 20.0 * math.exp(-1.0)
        assert t_end == pytest.approx(analytic, abs=20.0 * 5.0 / tau)
