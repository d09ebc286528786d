"""Strict experiment configuration: JSON on top of the bundled preset.

Unknown keys fail loudly, physical fields are validated, and a canonical
hash of the merged configuration ties every artifact to its inputs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

from .circuit import CircuitNetwork, DCouplerParams, LineSegment
from .dynamics import Bath, QubitParams, merge_baths
from .presets import RESET_TARGET_PE, T_HOT_KEYS, TWO_PI, default_config
from .protocols import LinkModel


class ConfigError(ValueError):
    """Configuration parsing or validation failure."""


# numeric fields allowed to be negative or zero
_ALLOW_NONPOSITIVE = {
    "anharmonicity_MHz", "seed", "confusion_error", "cold_load_occupancy",
    "pure_dephasing_per_us", "transfer_time_ns", "bell_release_ns",
    "bell_catch_ns", "reset_target_pe", "chevron_warm", "spam_correct",
    "n_a", "n_b", "n_c_on", "n_c_off",
}


def _merge_strict(default, user, path=""):
    if not isinstance(user, dict):
        raise ConfigError(f"expected a table at {path or 'top level'}")
    merged = {}
    for key, dval in default.items():
        merged[key] = dval
    for key, uval in user.items():
        here = f"{path}.{key}" if path else key
        if key not in default:
            raise ConfigError(f"unknown config key: {here}")
        dval = default[key]
        if isinstance(dval, dict):
            merged[key] = _merge_strict(dval, uval, here)
        else:
            if isinstance(dval, bool) != isinstance(uval, bool):
                raise ConfigError(f"{here}: expected {type(dval).__name__}")
            if isinstance(dval, (int, float)) and not isinstance(uval, (int, float)):
                raise ConfigError(f"{here}: expected a number")
            if isinstance(dval, list) and not isinstance(uval, list):
                raise ConfigError(f"{here}: expected a list")
            merged[key] = uval
    return merged


def _validate_numbers(tree, path=""):
    for key, val in tree.items():
        here = f"{path}.{key}" if path else key
        if isinstance(val, dict):
            _validate_numbers(val, here)
        elif isinstance(val, bool):
            continue
        elif isinstance(val, (int, float)):
            if not math.isfinite(val):
                raise ConfigError(f"{here}: must be finite")
            if key not in _ALLOW_NONPOSITIVE and val <= 0:
                raise ConfigError(f"{here}: must be positive")
        elif isinstance(val, list):
            if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in val):
                raise ConfigError(f"{here}: list entries must be finite numbers")


def _set_path(tree: dict, dotted: str, raw: str):
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"unknown config key: {dotted}")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError(f"unknown config key: {dotted}")
    try:
        node[keys[-1]] = json.loads(raw)
    except json.JSONDecodeError:
        node[keys[-1]] = raw


@dataclass
class ExperimentConfig:
    """Validated, fully merged configuration."""

    tree: dict

    @classmethod
    def from_tree(cls, user_tree: dict, overrides: list[str] = ()) -> "ExperimentConfig":
        merged = _merge_strict(default_config(), user_tree)
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            dotted, raw = item.split("=", 1)
            _set_path(merged, dotted, raw)
        _validate_numbers(merged)
        cfg = cls(merged)
        cfg.t_key()  # referenced temperature entry must exist
        return cfg

    def __getitem__(self, key):
        return self.tree[key]

    def hash(self) -> str:
        canon = json.dumps(self.tree, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def t_key(self) -> str:
        key = format(float(self.tree["t_hot_K"]), "g")
        if key not in self.tree["system"]["thermo"]:
            raise ConfigError(
                f"t_hot_K={self.tree['t_hot_K']} has no thermodynamic entry "
                f"(known: {', '.join(T_HOT_KEYS)})"
            )
        return key

    # -------------------------------------------------- physical objects

    def network(self) -> CircuitNetwork:
        c = self.tree["circuit"]
        stub = LineSegment(c["stub_inductance_nH_per_m"] * 1e-9,
                           c["stub_capacitance_pF_per_m"] * 1e-12,
                           c["stub_length_mm"] * 1e-3)
        cable = LineSegment(c["cable_inductance_nH_per_m"] * 1e-9,
                            c["cable_capacitance_pF_per_m"] * 1e-12,
                            c["cable_length_m"])
        try:
            dc = DCouplerParams(
                series_capacitance=c["series_capacitance_fF"] * 1e-15,
                parasitic_capacitance=c["parasitic_capacitance_fF"] * 1e-15,
                zero_flux_inductance=c["zero_flux_inductance_nH"] * 1e-9,
                parasitic_resistance=c["parasitic_resistance_ohm"],
                load_resistance=c["load_resistance_ohm"],
            )
        except ValueError as exc:
            raise ConfigError(f"circuit: {exc}") from exc
        return CircuitNetwork(near_stub=stub, cable=cable, far_stub=stub, dcoupler=dc)

    def _qubit(self, which: str, levels: int | None = None) -> QubitParams:
        s = self.tree["system"]
        th = s["thermo"][self.t_key()]
        idle = s[f"qubit_{which}_idle_GHz"] * TWO_PI * 1e9
        return QubitParams(
            frequency=idle,
            anharmonicity=s["anharmonicity_MHz"] * TWO_PI * 1e6,
            levels=levels or s["qubit_levels"],
            relaxation=1.0 / (th[f"t1_{which}_us"] * 1e-6),
            occupancy=th[f"n_{which}"],
            pure_dephasing=s["pure_dephasing_per_us"] * 1e6,
        )

    def kappa_intrinsic(self) -> float:
        return 1.0 / (self.tree["system"]["kappa_intrinsic_inv_ns"] * 1e-9)

    def kappa_d_on(self) -> float:
        return 1.0 / (self.tree["system"]["kappa_d_on_inv_ns"] * 1e-9)

    def kappa_d_off(self) -> float:
        return 1.0 / (self.tree["system"]["kappa_d_off_inv_ms"] * 1e-3)

    def link(self, levels: int | None = None, two_qubit: bool = True) -> LinkModel:
        """Link with measured mode-bath occupancies for the selected channel
        temperature; the off-state bath keeps only the intrinsic loss."""
        s = self.tree["system"]
        th = s["thermo"][self.t_key()]
        kappa_i = self.kappa_intrinsic()
        bath_on = Bath(kappa_i + self.kappa_d_on(), th["n_c_on"])
        bath_off = Bath(kappa_i, th["n_c_off"])
        return LinkModel(
            qubit_a=self._qubit("a", levels),
            qubit_b=self._qubit("b", levels) if two_qubit else None,
            mode_frequency=s["mode_frequency_GHz"] * TWO_PI * 1e9,
            g_a=s["g_a_MHz"] * TWO_PI * 1e6,
            g_b=s["g_b_MHz"] * TWO_PI * 1e6,
            bath_on=bath_on,
            bath_off=bath_off,
        )

    def merged_cold_bath(self) -> Bath:
        """On-state mode bath derived from rate merging instead of calibration."""
        s = self.tree["system"]
        th = s["thermo"][self.t_key()]
        return merge_baths([
            Bath(self.kappa_intrinsic(), th["n_c_off"]),
            Bath(self.kappa_d_on(), s["cold_load_occupancy"]),
        ])

    def reset_target(self) -> float:
        explicit = self.tree["protocols"]["reset_target_pe"]
        if explicit:
            return explicit
        return RESET_TARGET_PE.get(self.t_key(), 0.0)


def load_config(path, overrides: list[str] = ()) -> ExperimentConfig:
    """Parse and validate a JSON config file against the bundled preset."""
    try:
        with open(path) as fh:
            tree = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from exc
    return ExperimentConfig.from_tree(tree, overrides)


def preset_config(overrides: list[str] = ()) -> ExperimentConfig:
    return ExperimentConfig.from_tree({}, overrides)
