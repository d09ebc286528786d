import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warmlink.analysis import (
    FitError, SteadyScanResult, ThermalPoint, bose_einstein,
    effective_temperature, fit_damped_sine, fit_exponential, steady_scan,
)

TWO_PI = 2 * math.pi
W_MODE = TWO_PI * 7.48e9


class TestBoseEinstein:
    def test_reference_occupancies(self):
        assert bose_einstein(W_MODE, 2.0) == pytest.approx(5.086, abs=0.002)
        assert bose_einstein(W_MODE, 4.0) == pytest.approx(10.650, abs=0.003)

    def test_low_temperature_limit(self):
        assert bose_einstein(W_MODE, 1e-3) == pytest.approx(0.0, abs=1e-100)
        assert bose_einstein(W_MODE, 0.01) < 3e-16

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            bose_einstein(-1.0, 2.0)
        with pytest.raises(ValueError):
            bose_einstein(W_MODE, 0.0)

    def test_effective_temperature_references(self):
        assert effective_temperature(W_MODE, 5.09) == pytest.approx(2.001, abs=0.005)
        assert effective_temperature(W_MODE, 0.06) == pytest.approx(0.1250, abs=0.0005)
        with pytest.raises(ValueError):
            effective_temperature(W_MODE, 0.0)

    @given(st.floats(min_value=-4, max_value=3))
    @settings(max_examples=60, deadline=None)
    def test_inverse_pair(self, log_n):
        n = 10.0 ** log_n
        t = effective_temperature(W_MODE, n)
        back = bose_einstein(W_MODE, t)
        assert abs(back - n) <= 1e-10 * n

    def test_thermal_point_constructors(self):
        a = ThermalPoint.from_temperature(W_MODE, 2.0)
        b = ThermalPoint.from_occupancy(W_MODE, a.occupancy)
        assert b.temperature == pytest.approx(2.0, rel=1e-10)


class TestExponentialFit:
    def test_noiseless_recovery(self):
        t = np.linspace(0, 4e-6, 200)
        y = 1.0 * np.exp(-t / 760e-9) + 0.34
        fit = fit_exponential(t, y)
        assert fit.tau == pytest.approx(760e-9, rel=1e-6)
        assert fit.amplitude == pytest.approx(1.0, rel=1e-6)
        assert fit.offset == pytest.approx(0.34, rel=1e-6)

    def test_constant_series(self):
        t = np.linspace(0, 1e-6, 50)
        fit = fit_exponential(t, np.full(50, 0.25))
        assert fit.amplitude == 0.0
        assert fit.offset == pytest.approx(0.25)

    def test_rising_trace(self):
        t = np.linspace(0, 4e-6, 150)
        y = 0.34 - 0.34 * np.exp(-t / 760e-9)
        fit = fit_exponential(t, y)
        assert fit.tau == pytest.approx(760e-9, rel=1e-6)
        assert fit.amplitude == pytest.approx(-0.34, rel=1e-6)

    def test_noisy_recovery_within_five_percent(self):
        t = np.linspace(0, 4e-6, 200)
        clean = 1.0 * np.exp(-t / 760e-9) + 0.34
        taus = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            fit = fit_exponential(t, clean + rng.normal(0, 0.01, size=t.size))
            taus.append(fit.tau)
        assert np.median(np.abs(np.array(taus) / 760e-9 - 1.0)) < 0.05

    def test_input_validation(self):
        with pytest.raises(ValueError):
            fit_exponential([0, 1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            fit_exponential([0, 1, 1, 2, 3], [1, 2, 3, 4, 5])


class TestDampedSineFit:
    def test_synthetic_recovery(self):
        t = np.linspace(0, 1e-6, 400)
        w = TWO_PI * 5e6
        y = 0.4 * np.exp(-t / 400e-9) * np.cos(w * t + 0.3) + 0.5
        fit = fit_damped_sine(t, y)
        assert fit.frequency == pytest.approx(w, rel=1e-6)
        assert fit.tau == pytest.approx(400e-9, rel=1e-6)
        assert fit.amplitude == pytest.approx(0.4, rel=1e-6)

    def test_pure_cosine_has_vanishing_rate(self):
        t = np.linspace(0, 1e-6, 300)
        y = 0.3 * np.cos(TWO_PI * 4e6 * t) + 0.5
        fit = fit_damped_sine(t, y)
        assert fit.rate == pytest.approx(0.0, abs=2e4)  # tau >> trace span

    def test_no_peak_rejected(self):
        t = np.linspace(0, 1e-6, 64)
        rng = np.random.default_rng(0)
        with pytest.raises(FitError):
            fit_damped_sine(t, np.full(64, 0.5) + rng.normal(0, 1e-12, 64))

    def test_too_few_periods_rejected(self):
        t = np.linspace(0, 1e-6, 100)
        y = np.cos(TWO_PI * 0.8e6 * t)
        with pytest.raises(FitError):
            fit_damped_sine(t, y)

    def test_ramsey_loopback_frequency(self, lossless_link):
        # trace generated by the dynamics engine at a programmed detuning
        from warmlink.dynamics import evolve, DensityMatrix, ground_state
        import warmlink.protocols as protocols
        delta = TWO_PI * 6e6
        model = lossless_link.system(which="a", g=(0.0,), cutoff=2,
                                     detunings=(delta,))
        levels = model.dims[0]
        plus = np.zeros((levels, levels), dtype=complex)
        plus[:2, :2] = 0.5
        mode0 = np.zeros((2, 2), dtype=complex)
        mode0[0, 0] = 1.0
        rho0 = DensityMatrix(np.kron(plus, mode0), (levels, 2))
        x_block = np.zeros((levels, levels))
        x_block[0, 1] = x_block[1, 0] = 1.0
        sx = np.kron(x_block, np.eye(2)).astype(complex)
        traj = evolve(rho0, model.hamiltonian(), [], 500e-9, 0.05e-9,
                      sample_interval=2e-9, observables={"x": sx})
        fit = fit_damped_sine(traj.times, traj.observables["x"])
        assert fit.frequency == pytest.approx(delta, rel=1e-2)


class TestSteadyScan:
    def test_star_readout_cold_channel(self, cfg):
        link = cfg.link(levels=int(cfg.tree["system"]["steady_state_qubit_levels"]),
                        two_qubit=False)
        kappa_on = cfg.kappa_intrinsic() + cfg.kappa_d_on()
        occ = np.geomspace(0.02, 0.2, 7)
        kap = np.array([kappa_on * 0.5, kappa_on, kappa_on * 2.0])
        scan = steady_scan(link.qubit_a, link.g_a, link.mode_frequency,
                           occ, kap, target_pe=0.095)
        n_est, lo, hi = scan.occupancy_with_error(kappa_on)
        assert n_est == pytest.approx(0.059, rel=0.15)
        assert lo < n_est < hi

    def test_monotone_in_occupancy(self, cfg):
        link = cfg.link(two_qubit=False)
        occ = np.geomspace(0.1, 3.0, 5)
        kap = np.array([1e6, 3e6])
        scan = steady_scan(link.qubit_a, link.g_a, link.mode_frequency,
                           occ, kap, target_pe=0.3)
        assert np.all(np.diff(scan.pe_surface, axis=1) > 0)

    def test_single_point_grid(self, cfg):
        link = cfg.link(two_qubit=False)
        occ = np.array([0.52])
        kap = np.array([1e6])
        probe = steady_scan(link.qubit_a, link.g_a, link.mode_frequency,
                            occ, kap, target_pe=0.5)
        pe = float(probe.pe_surface[0, 0])
        scan = steady_scan(link.qubit_a, link.g_a, link.mode_frequency,
                           occ, kap, target_pe=pe)
        assert scan.contour == [(0.52, 1e6)]

    def test_target_outside_range_flagged_empty(self, cfg):
        link = cfg.link(two_qubit=False)
        scan = steady_scan(link.qubit_a, link.g_a, link.mode_frequency,
                           np.array([0.1, 0.2]), np.array([1e6, 2e6]),
                           target_pe=0.99)
        assert scan.contour == []
        with pytest.raises(ValueError):
            scan.occupancy_at(1e6)

    def test_invalid_grids(self, cfg):
        link = cfg.link(two_qubit=False)
        with pytest.raises(ValueError):
            steady_scan(link.qubit_a, link.g_a, link.mode_frequency,
                        np.array([0.0, 0.1]), np.array([1e6]), 0.5)
