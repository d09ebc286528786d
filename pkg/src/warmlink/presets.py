"""Bundled device preset: measured circuit constants and the per-temperature
thermodynamic table of the reference device, used as config defaults."""

from __future__ import annotations

import copy
import math

TWO_PI = 2.0 * math.pi

# channel temperatures with calibrated thermodynamic entries
T_HOT_KEYS = ("0.83", "1", "2", "3", "4")

DEFAULT_CONFIG: dict = {
    "t_hot_K": 4.0,
    "seed": 0,
    "circuit": {
        "stub_inductance_nH_per_m": 402.0,
        "stub_capacitance_pF_per_m": 173.0,
        "stub_length_mm": 2.8,
        "cable_inductance_nH_per_m": 240.5,
        "cable_capacitance_pF_per_m": 96.2,
        "cable_length_m": 1.0,
        "series_capacitance_fF": 38.5,
        "parasitic_capacitance_fF": 17.0,
        "zero_flux_inductance_nH": 3.8,
        "parasitic_resistance_ohm": 2300.0,
        "load_resistance_ohm": 50.0,
        "band_GHz": [4.0, 8.0],
        "target_mode_GHz": 7.48,
        "flux_sweep_step": 0.002,
    },
    "system": {
        "mode_frequency_GHz": 7.48,
        "qubit_a_idle_GHz": 7.429,
        "qubit_b_idle_GHz": 7.538,
        "anharmonicity_MHz": -204.0,
        "qubit_levels": 3,
        "steady_state_qubit_levels": 5,
        "g_a_MHz": 5.0,
        "g_b_MHz": 5.0,
        "pure_dephasing_per_us": 0.0,
        "kappa_intrinsic_inv_ns": 820.0,    # stored as 1/kappa in ns
        "kappa_d_on_inv_ns": 9.6,
        "kappa_d_off_inv_ms": 1.7,
        "cold_load_occupancy": 0.0,
        "thermo": {
            # per-temperature calibration: qubit relaxation times (us), bath
            # occupancies, and the channel occupancy with the cooler on/off
            "0.83": {"t1_a_us": 2.74, "n_a": 0.13, "t1_b_us": 3.54, "n_b": 0.14,
                      "n_c_on": 0.016, "n_c_off": 0.48},
            "1": {"t1_a_us": 2.80, "n_a": 0.16, "t1_b_us": 3.48, "n_b": 0.16,
                   "n_c_on": 0.026, "n_c_off": 0.52},
            "2": {"t1_a_us": 2.05, "n_a": 0.26, "t1_b_us": 2.75, "n_b": 0.25,
                   "n_c_on": 0.032, "n_c_off": 0.92},
            "3": {"t1_a_us": 1.37, "n_a": 0.36, "t1_b_us": 1.83, "n_b": 0.36,
                   "n_c_on": 0.040, "n_c_off": 1.92},
            "4": {"t1_a_us": 1.08, "n_a": 0.52, "t1_b_us": 1.30, "n_b": 0.42,
                   "n_c_on": 0.059, "n_c_off": 5.64},
        },
    },
    "protocols": {
        "transfer_time_ns": 0.0,        # 0 -> use the trajectory maximum
        "bell_release_ns": 0.0,         # 0 -> grid search
        "bell_catch_ns": 0.0,
        "transfer_cutoff": 12,
        "cooling_duration_ns": 600.0,
        "retherm_duration_us": 4.0,
        "fit_window_us": 4.0,
        "chevron_detuning_span_MHz": 30.0,
        "chevron_detuning_points": 21,
        "chevron_duration_ns": 250.0,
        "chevron_warm": False,
        "reset_duration_us": 1.0,
        "reset_target_pe": 0.0,         # 0 -> cold resonator bath
        "reset_kappa_inv_ns": 60.0,
        "reset_swap_period_ns": 3.2,
    },
    "scan": {
        "occupancy_min": 1.0,
        "occupancy_max": 9.0,
        "occupancy_points": 8,
        "kappa_min_per_s": 4.0e5,
        "kappa_max_per_s": 8.0e6,
        "kappa_points": 5,
        "target_pe": 0.556,
    },
    "tomography": {
        "confusion_error": 0.0,
        "spam_correct": True,
    },
}

# equilibrium excitation targets of the resonator-reset experiment
RESET_TARGET_PE = {"1": 0.028, "2": 0.050, "3": 0.085, "4": 0.111}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)
