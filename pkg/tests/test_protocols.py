import math

import numpy as np
import pytest

from warmlink.dynamics import (
    DensityMatrix, QubitParams, excited_projector, expectation, ground_state,
    number_op, partial_trace, thermal_state,
)
from warmlink.protocols import (
    Bath, LinkModel, ScheduleSegment, bell_protocol, bell_target,
    cooling_protocol, optimize_bell_timings, optimize_transfer_time,
    photon_transfer_protocol, qubit_pair_state, rabi_chevron_scan,
    readout_reset_protocol, resonator_occupancy_for_target,
    rethermalization_protocol, run_schedule, transfer_process_fidelity,
)
from warmlink.tomography import fidelity_state

TWO_PI = 2 * math.pi
G5 = TWO_PI * 5e6


class TestRunSchedule:
    def test_empty_schedule_returns_input(self, link_4k):
        rho0 = ground_state((3, 3, 4))
        res = run_schedule(link_4k, [], rho0, cutoff=4)
        assert np.array_equal(res.final.matrix, rho0.matrix)
        assert res.times.shape == (1,)

    def test_closed_segment_preserves_spectrum(self, lossless_link):
        dims = (3, 3, 4)
        rho0 = DensityMatrix(
            np.kron(np.kron(thermal_state(3, 0.3), thermal_state(3, 0.2)),
                    thermal_state(4, 0.1)), dims)
        evals0 = np.sort(np.linalg.eigvalsh(rho0.matrix))
        seg = ScheduleSegment(duration=40e-9, g=(G5, G5), d_coupler="off")
        res = run_schedule(lossless_link, [seg], rho0, cutoff=4)
        evals1 = np.sort(np.linalg.eigvalsh(res.final.matrix))
        assert np.max(np.abs(evals0 - evals1)) < 1e-9

    def test_excitation_conservation_closed(self, lossless_link):
        dims = (3, 3, 4)
        rho0 = ground_state(dims)
        seg = ScheduleSegment(duration=120e-9, g=(G5, G5), d_coupler="off",
                              initial_ops=(("pi", 0),))
        res = run_schedule(lossless_link, [seg], rho0, cutoff=4,
                           sample_interval=4e-9)
        n_ops = number_op(dims, 0) + number_op(dims, 1) + number_op(dims, 2)
        assert expectation(res.final, n_ops) == pytest.approx(1.0, abs=1e-8)

    def test_invalid_prep_rejected(self):
        with pytest.raises(ValueError):
            ScheduleSegment(duration=1e-9, g=(0.0,), initial_ops=(("flip", 0),))


class TestTransfer:
    def test_lossless_transfer_curve(self, lossless_link):
        # single-excitation chain: P_e(receiver) = sin^4(g t / sqrt(2))
        res = photon_transfer_protocol(lossless_link, 100e-9, cutoff=4)
        expected = np.sin(G5 * res.times / math.sqrt(2)) ** 4
        assert np.max(np.abs(res.observables["pe_q1"] - expected)) < 1e-6

    def test_lossless_optimum_time(self, lossless_link):
        t_star, peak = optimize_transfer_time(lossless_link, cutoff=4)
        assert t_star * 1e9 == pytest.approx(math.pi / (math.sqrt(2) * G5) * 1e9, abs=1.0)
        assert peak > 0.999

    def test_timing_stationarity(self, lossless_link):
        t_star, _ = optimize_transfer_time(lossless_link, cutoff=4)
        h = 0.25e-9
        vals = []
        for t in (t_star - h, t_star + h):
            res = photon_transfer_protocol(lossless_link, t, cutoff=4)
            vals.append(res.observables["pe_q1"][-1])
        slope_per_ns = abs(vals[1] - vals[0]) / (2 * h) * 1e-9
        assert slope_per_ns < 1e-4

    def test_vacuum_input_stays_vacuum(self, lossless_link):
        res = photon_transfer_protocol(lossless_link, 70e-9, input_prep=(), cutoff=4)
        assert res.observables["pe_q1"][-1] == pytest.approx(0.0, abs=1e-10)
        assert res.observables["mode_n"][-1] == pytest.approx(0.0, abs=1e-10)

    def test_transfer_symmetry(self, lossless_link):
        link = lossless_link
        sym = LinkModel(qubit_a=link.qubit_a, qubit_b=link.qubit_a,
                        mode_frequency=link.mode_frequency, g_a=link.g_a,
                        g_b=link.g_a, bath_on=link.bath_on, bath_off=link.bath_off)
        fwd = photon_transfer_protocol(sym, 80e-9, input_prep=(("pi", 0),), cutoff=4)
        bwd = photon_transfer_protocol(sym, 80e-9, input_prep=(("pi", 1),), cutoff=4)
        assert np.max(np.abs(fwd.observables["pe_q1"] - bwd.observables["pe_q0"])) < 1e-9

    def test_lossless_process_fidelity(self, lossless_link):
        t_star = math.pi / (math.sqrt(2) * G5)
        chi, f = transfer_process_fidelity(lossless_link, t_star, cutoff=4)
        assert f > 0.999
        assert chi.matrix[0, 0].real > 0.999


class TestBell:
    def test_lossless_grid_search_and_fidelity(self, lossless_link):
        t1, t2, f = optimize_bell_timings(lossless_link, cutoff=4)
        assert f > 0.999
        assert t1 * 1e9 == pytest.approx(25.0, abs=1.0)
        assert t2 * 1e9 == pytest.approx(50.0, abs=1.0)

    def test_lossless_protocol_hits_target(self, lossless_link):
        res = bell_protocol(lossless_link, 25e-9, 50e-9, cutoff=4)
        pair, leakage = qubit_pair_state(res.final)
        assert fidelity_state(pair, bell_target()) > 0.999
        assert leakage == pytest.approx(0.0, abs=1e-9)

    def test_maximally_mixed_fidelity(self):
        mixed = DensityMatrix(np.eye(4, dtype=complex) / 4, (2, 2))
        assert fidelity_state(mixed, bell_target()) == pytest.approx(0.25)

    def test_monotone_degradation_in_channel_occupancy(self, link_4k):
        fids = []
        for n_c in (0.48, 1.92, 5.64):
            link = LinkModel(qubit_a=link_4k.qubit_a, qubit_b=link_4k.qubit_b,
                             mode_frequency=link_4k.mode_frequency,
                             g_a=link_4k.g_a, g_b=link_4k.g_b,
                             bath_on=link_4k.bath_on,
                             bath_off=Bath(link_4k.bath_off.kappa, n_c))
            res = bell_protocol(link, 21e-9, 37e-9, cutoff=10)
            pair, _ = qubit_pair_state(res.final)
            fids.append(fidelity_state(pair, bell_target()))
        assert fids[0] > fids[1] > fids[2]


class TestChevron:
    def test_resonant_oscillation_period(self, lossless_link):
        times, pemap = rabi_chevron_scan(lossless_link, [0.0], duration=100e-9)
        pe = pemap[0]
        # P_e = cos^2(g t): returns to 1 at t = pi/g = 100 ns
        assert pe[0] == pytest.approx(1.0, abs=1e-9)
        assert pe[-1] == pytest.approx(1.0, abs=1e-6)
        assert pe[len(pe) // 2] == pytest.approx(0.0, abs=1e-6)

    def test_detuned_oscillation_frequency(self, lossless_link):
        from warmlink.analysis import fit_damped_sine
        delta = TWO_PI * 8e6
        times, pemap = rabi_chevron_scan(lossless_link, [delta], duration=300e-9)
        fit = fit_damped_sine(times, pemap[0])
        assert fit.frequency == pytest.approx(math.sqrt(delta ** 2 + 4 * G5 ** 2),
                                              rel=1e-3)

    def test_warm_channel_shows_thermal_oscillation(self, cfg):
        import json
        tree = json.loads(json.dumps(cfg.tree))
        tree["t_hot_K"] = 1.0
        from warmlink.config import ExperimentConfig
        link = ExperimentConfig(tree).link(two_qubit=False)
        times, pemap = rabi_chevron_scan(link, [0.0], duration=200e-9, warm=True)
        pe = pemap[0]
        assert pe[0] < 0.02
        assert pe.max() > 0.2  # thermal photons picked up from the channel

    def test_map_shape(self, lossless_link):
        detunings = np.linspace(-TWO_PI * 10e6, TWO_PI * 10e6, 5)
        times, pemap = rabi_chevron_scan(lossless_link, detunings, duration=60e-9)
        assert pemap.shape == (5, len(times))


class TestCoolingAndRetherm:
    def test_cooling_monotone_decay(self, link_4k_single):
        res = cooling_protocol(link_4k_single, duration=600e-9)
        pe = res.observables["pe_q0"]
        assert pe[0] == pytest.approx(0.3147, abs=0.005)
        # overall decaying trend with a steady tail near the cooled value
        coarse = pe[:: len(pe) // 10]
        assert np.all(np.diff(coarse) < 1e-3)
        assert 0.06 < pe[-1] < 0.12

    def test_cooling_to_zero_with_cold_baths(self, lossless_link):
        link = lossless_link
        # cold baths on a thermal initial state pull everything to vacuum
        import dataclasses
        q = dataclasses.replace(link.qubit_a, relaxation=2e6, occupancy=0.0)
        cold = LinkModel(qubit_a=q, qubit_b=None,
                         mode_frequency=link.mode_frequency, g_a=link.g_a,
                         g_b=link.g_b, bath_on=Bath(1e8, 0.0), bath_off=Bath(1e6, 0.0))
        res = cooling_protocol(cold, duration=600e-9)
        assert res.observables["pe_q0"][-1] < 1e-3

    def test_retherm_alone_rises_to_equilibrium(self, link_4k_single):
        res = rethermalization_protocol(link_4k_single, duration=4e-6, coupled=False)
        pe = res.observables["pe_q0"]
        assert pe[0] == 0.0
        assert pe[-1] == pytest.approx(0.3147, abs=0.01)
        assert np.all(np.diff(pe) > -1e-9)

    def test_retherm_alone_timescale(self, link_4k_single):
        from warmlink.analysis import fit_exponential
        res = rethermalization_protocol(link_4k_single, duration=4e-6, coupled=False)
        fit = fit_exponential(res.times, res.observables["pe_q0"])
        assert fit.tau * 1e6 == pytest.approx(0.714, abs=0.05)


class TestReadoutReset:
    def test_closed_swap_period(self):
        q = QubitParams(frequency=TWO_PI * 7.43e9, anharmonicity=-TWO_PI * 204e6,
                        levels=3)
        # full swap out at half the 3.2 ns period, back at the full period
        out = readout_reset_protocol(q, duration=1.6e-9, resonator_kappa=0.0,
                                     sample_interval=1.6e-9)
        assert out.observables["pe_q0"][-1] == pytest.approx(0.0, abs=1e-6)
        back = readout_reset_protocol(q, duration=3.2e-9, resonator_kappa=0.0,
                                      sample_interval=3.2e-9)
        assert back.observables["pe_q0"][-1] == pytest.approx(1.0, abs=1e-6)

    def test_cold_resonator_resets_below_percent(self, link_4k_single):
        res = readout_reset_protocol(link_4k_single.qubit_a, duration=1e-6)
        pe = res.observables["pe_q0"]
        # envelope decays on the 60 ns scale, equilibrium set by both baths
        assert pe[-1] < 0.05
        q0 = link_4k_single.qubit_a
        lossless_q = QubitParams(frequency=q0.frequency, anharmonicity=q0.anharmonicity,
                                 levels=q0.levels)
        res0 = readout_reset_protocol(lossless_q, duration=1e-6)
        assert res0.observables["pe_q0"][-1] < 0.01

    def test_target_equilibrium_tuning(self, link_4k_single):
        occ = resonator_occupancy_for_target(link_4k_single.qubit_a, 0.111)
        res = readout_reset_protocol(link_4k_single.qubit_a, duration=1.2e-6,
                                     resonator_occupancy=occ)
        tail = res.observables["pe_q0"][res.times > 1.0e-6]
        assert tail.mean() == pytest.approx(0.111, abs=0.005)


class TestPairState:
    def test_product_state_extraction(self):
        qa = np.diag([0.8, 0.15, 0.05]).astype(complex)
        qb = np.diag([0.9, 0.1, 0.0]).astype(complex)
        mode = thermal_state(4, 0.2)
        rho = DensityMatrix(np.kron(np.kron(qa, qb), mode), (3, 3, 4))
        pair, leakage = qubit_pair_state(rho, receiver_z=None)
        expected = np.kron(qa[:2, :2], qb[:2, :2])
        expected /= np.trace(expected)
        assert np.allclose(pair.matrix, expected)
        assert leakage == pytest.approx(1 - 0.95 * 1.0, abs=1e-12)
