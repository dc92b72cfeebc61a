import itertools

import numpy as np
import pytest

from fuzzy_tilc.oven import (
    DISTURBED,
    KELVIN,
    NOMINAL,
    Oven,
    OvenParams,
    SimulationError,
    ambient_drift,
    heater_expand,
    mirror_zone,
    parallel_rect_view_factor,
    read_sensors,
    simulate_cycle,
    view_factor_matrix,
    zone_position,
)
from oracles import monte_carlo_view_factor

CASE_A_U = np.array([380.0, 350.0, 390.0, 380.0, 350.0, 390.0])


@pytest.fixture(scope="module")
def oven():
    return Oven(NOMINAL)


def mirror_input(u):
    # zone 1 is driven by u[1], zone 3 by u[2]; a left-right mirror swaps them
    return np.asarray(u)[..., [0, 2, 1, 3, 5, 4]]


def swap_banks(u):
    return np.asarray(u)[..., [3, 4, 5, 0, 1, 2]]


class TestViewFactors:
    def test_unit_squares(self):
        assert parallel_rect_view_factor((0, 1, 0, 1), (0, 1, 0, 1), 1.0) == pytest.approx(0.19982, abs=5e-5)

    def test_touching_plates(self):
        F = view_factor_matrix(NOMINAL.with_overrides(heater_distance=0.30 * 1e-4, heater_area=None))
        np.testing.assert_allclose(np.diag(F), 1.0, atol=1e-3)
        np.testing.assert_allclose(F - np.diag(np.diag(F)), 0.0, atol=1e-3)

    def test_far_field(self):
        F = view_factor_matrix(NOMINAL.with_overrides(heater_distance=30.0))
        assert F.max() < 1e-4

    def test_monte_carlo_oracle(self):
        p = NOMINAL
        s = np.sqrt(p.heater_area / p.zone_area)
        heater = (0.15 - 0.15 * s, 0.15 + 0.15 * s, 0.15 - 0.15 * s, 0.15 + 0.15 * s)
        for receiver in [(0.0, 0.3, 0.0, 0.3), (0.3, 0.6, 0.0, 0.3), (0.3, 0.6, 0.3, 0.6)]:
            exact = parallel_rect_view_factor(heater, receiver, p.heater_distance)
            mc = monte_carlo_view_factor(heater, receiver, p.heater_distance, 2_000_000, seed=1)
            assert abs(exact - mc) < 1e-3

    def test_row_sums_and_mirror(self):
        F = view_factor_matrix(NOMINAL)
        assert np.all(F.sum(axis=0) <= 1.0)
        for k, j in itertools.product(range(1, 7), repeat=2):
            assert F[mirror_zone(k) - 1, mirror_zone(j) - 1] == pytest.approx(F[k - 1, j - 1], abs=1e-12)

    def test_layout(self):
        assert [zone_position(k) for k in (1, 3, 4, 6)] == [(0, 0), (0, 2), (1, 0), (1, 2)]
        assert [mirror_zone(k) for k in range(1, 7)] == [3, 2, 1, 6, 5, 4]


class TestHeaterGrouping:
    def test_uniform(self):
        np.testing.assert_array_equal(heater_expand(np.full(6, 375.0)), 375.0)

    def test_grouping(self):
        th = heater_expand(np.arange(1.0, 7.0))
        np.testing.assert_array_equal(th[:6], [2, 1, 3, 2, 1, 3])
        np.testing.assert_array_equal(th[6:], [5, 4, 6, 5, 4, 6])

    def test_bank_swap(self):
        u = np.arange(1.0, 7.0)
        th, th_s = heater_expand(u), heater_expand(swap_banks(u))
        np.testing.assert_array_equal(th[:6], th_s[6:])
        np.testing.assert_array_equal(th[6:], th_s[:6])


class TestDynamics:
    def test_equilibrium(self, oven):
        T0 = np.full((6, 5), 400.0)
        T = oven.simulate_cycle(np.full(6, 400.0 - KELVIN), 400.0 - KELVIN, T0=T0)
        assert np.abs(T - 400.0).max() <= 1e-9

    def test_all_nodes_heat_up(self, oven):
        T = oven.simulate_cycle(np.full(6, 300.0), 125.0)
        assert np.all(T > NOMINAL.initial_temp + KELVIN)

    def test_step_halving(self, oven):
        T_half = oven.simulate_cycle(CASE_A_U, dt=0.5)
        T_one = oven.simulate_cycle(CASE_A_U, dt=1.0)
        assert np.abs(T_half - T_one).max() <= 0.01

    @pytest.mark.parametrize("duration", [5.0, 30.0, 120.0, 300.0])
    def test_bounded(self, oven, duration):
        u = np.array([300.0, 450.0, 320.0, 410.0, 380.0, 300.0])
        T = oven.simulate_cycle(u, 125.0, duration=duration) - KELVIN
        assert T.max() <= max(u.max(), 125.0)
        assert T.min() >= min(u.min(), 125.0, NOMINAL.initial_temp)

    def test_mirror_symmetry(self, oven, rng):
        u = rng.uniform(300, 450, 6)
        T = oven.simulate_cycle(u)
        Tm = oven.simulate_cycle(mirror_input(u))
        for k in range(1, 7):
            np.testing.assert_allclose(Tm[mirror_zone(k) - 1], T[k - 1], atol=1e-9, rtol=0)

    def test_top_bottom_symmetry(self, oven, rng):
        u = rng.uniform(300, 450, 6)
        T = oven.simulate_cycle(u)
        Ts = oven.simulate_cycle(swap_banks(u))
        np.testing.assert_allclose(Ts, T[:, ::-1], atol=1e-9, rtol=0)

    def test_monotone_single_heater(self, oven):
        grid = np.array(list(itertools.product((300.0, 375.0, 450.0), repeat=6)))
        T = oven.simulate_cycle(grid)
        index = {tuple(g): i for i, g in enumerate(grid)}
        for i, g in enumerate(grid):
            for j in range(6):
                if g[j] < 450.0:
                    h = g.copy()
                    h[j] += 75.0
                    assert np.all(T[index[tuple(h)]] >= T[i] - 1e-9)

    def test_batch_matches_single(self, oven, rng):
        U = rng.uniform(300, 450, (3, 6))
        T = oven.simulate_cycle(U, [120.0, 125.0, 140.0])
        for u, a, t in zip(U, [120.0, 125.0, 140.0], T):
            np.testing.assert_allclose(simulate_cycle(oven, u, a), t, rtol=1e-13)

    def test_disturbed_differs(self, oven):
        y_n = oven.terminal_outputs(CASE_A_U)
        y_d = Oven(DISTURBED).terminal_outputs(CASE_A_U)
        assert np.abs(y_n - y_d).max() > 1.0

    def test_non_finite_raises(self, oven):
        with pytest.raises(SimulationError):
            oven.simulate_cycle(np.full(6, 450.0), dt=100.0)


class TestSensors:
    def test_noise_free(self, oven):
        T = oven.simulate_cycle(CASE_A_U)
        np.testing.assert_array_equal(read_sensors(oven, T), oven.sensor_values(T))

    def test_noise_sd(self, oven):
        T = oven.simulate_cycle(CASE_A_U)
        clean = oven.sensor_values(T)
        reads = np.array([oven.read_sensors(T, 2.0, seed=5, cycle=k) for k in range(10_000)]) - clean
        assert np.all(np.abs(reads.std(axis=0, ddof=1) - 2.0) < 0.1)

    def test_cold_oven_pattern(self, oven):
        y = oven.terminal_outputs(np.full(6, 300.0))
        assert y[0] == pytest.approx(y[2], abs=1e-9)
        assert y[3] == pytest.approx(y[5], abs=1e-9)
        assert y[1] > y[0] and y[4] > y[3]


class TestDrift:
    def test_reference(self):
        assert ambient_drift(0) == pytest.approx(125.0)

    def test_peak(self):
        k = np.pi / 2 / 0.0175
        assert ambient_drift(k) == pytest.approx(145.0)
        assert ambient_drift(90) == pytest.approx(145.0, abs=1e-3)

    def test_disabled(self):
        np.testing.assert_array_equal(ambient_drift(np.arange(60), enabled=False), 125.0)


class TestParams:
    def test_disturbed_column(self):
        assert (DISTURBED.density, DISTURBED.specific_heat, DISTURBED.emissivity) == (1045.0, 2022.0, 0.495)
        assert (DISTURBED.absorptivity, DISTURBED.conduction, DISTURBED.convection) == (350.0, 0.3, 10.0)

    @pytest.mark.parametrize("kw", [{"dt": 2.0}, {"density": 0.0}, {"sensor_zones": (1, 2, 7)}, {"heater_area": -1.0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            OvenParams(**kw)

    def test_absorption_fractions(self):
        dz = NOMINAL.thickness / 5
        assert NOMINAL.surface_absorption == pytest.approx(1 - np.exp(-300 * dz / 2))
        assert NOMINAL.internal_absorption == pytest.approx(1 - np.exp(-300 * dz))
