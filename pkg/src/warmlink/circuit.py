"""Transmission-line network model of the qubit-cable-coupler chain.

The communication channel is a superconducting cable terminated on both chips
by short quarter-wave CPW stubs; a flux-tunable dissipation coupler connects
the far stub node to a cold 50 ohm load.  Standing modes are located as zeros
of Im[Z_in(omega)] seen from the near port, and their dissipation rates follow
from the local slope of the reactance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LineSegment",
    "DCouplerParams",
    "FluxBias",
    "ModeSolution",
    "CircuitNetwork",
    "InvalidFluxError",
    "segment_impedance",
    "dcoupler_impedance",
    "input_impedance",
    "find_modes",
    "kappa_flux_sweep",
    "off_point_flux",
    "on_point_flux",
]

_COS_POLE_EPS = 1e-12
_BISECT_TOL = 2 * math.pi * 1e3      # root refinement, rad/s
_FD_STEP = 2 * math.pi * 10e3        # reactance-slope step, rad/s


class InvalidFluxError(ValueError):
    """Flux bias where the coupler inductance would be non-positive."""


@dataclass(frozen=True)
class LineSegment:
    """Uniform lossless line described by per-length constants."""

    inductance_per_length: float   # H/m
    capacitance_per_length: float  # F/m
    length: float                  # m

    def __post_init__(self):
        if self.inductance_per_length <= 0 or self.capacitance_per_length <= 0:
            raise ValueError("per-length inductance and capacitance must be positive")
        if self.length < 0:
            raise ValueError("segment length must be non-negative")

    @property
    def characteristic_impedance(self) -> float:
        return math.sqrt(self.inductance_per_length / self.capacitance_per_length)

    @property
    def phase_velocity(self) -> float:
        return 1.0 / math.sqrt(self.inductance_per_length * self.capacitance_per_length)


@dataclass(frozen=True)
class DCouplerParams:
    """Lumped model of the dissipation coupler and its cold load."""

    series_capacitance: float     # F
    parasitic_capacitance: float  # F
    zero_flux_inductance: float   # H
    parasitic_resistance: float   # ohm, may be inf
    load_resistance: float        # ohm

    def __post_init__(self):
        for name in ("series_capacitance", "parasitic_capacitance",
                     "zero_flux_inductance", "parasitic_resistance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.load_resistance < 0:
            raise ValueError("load_resistance must be non-negative")
        if self.parasitic_capacitance >= self.series_capacitance:
            raise ValueError("parasitic_capacitance must be smaller than series_capacitance")


@dataclass(frozen=True)
class FluxBias:
    """Reduced flux through the coupler SQUID, in units of the flux quantum."""

    phi_ratio: float

    def __post_init__(self):
        if math.cos(math.pi * self.phi_ratio) <= _COS_POLE_EPS:
            raise InvalidFluxError(
                f"phi_ratio={self.phi_ratio} gives non-positive coupler inductance"
            )

    def inductance(self, zero_flux_inductance: float) -> float:
        return zero_flux_inductance / math.cos(math.pi * self.phi_ratio)


@dataclass(frozen=True)
class ModeSolution:
    """One standing mode found in a scan band."""

    mode_index: int
    omega_m: float          # rad/s
    quality_factor: float
    kappa: float            # 1/s, always omega_m / quality_factor
    freq_shift_vs_off: float  # rad/s, relative to the same mode at the off point

    def __post_init__(self):
        if self.omega_m <= 0 or self.quality_factor <= 0:
            raise ValueError("mode frequency and quality factor must be positive")
        if self.kappa != self.omega_m / self.quality_factor:
            raise ValueError("kappa must equal omega_m / quality_factor")


@dataclass(frozen=True)
class CircuitNetwork:
    """Near stub -> cable -> (far stub parallel coupler) chain."""

    near_stub: LineSegment
    cable: LineSegment
    far_stub: LineSegment
    dcoupler: DCouplerParams

    @property
    def ideal_fsr(self) -> float:
        """Mode spacing of the bare cable shorted at both ends, rad/s."""
        return math.pi * self.cable.phase_velocity / self.cable.length


def segment_impedance(seg: LineSegment, load: complex, omega: float) -> complex:
    """Input impedance of a lossless line of length l terminated by ``load``.

    ``load=inf`` selects the open-termination form.  Quarter-wave poles of
    tan(beta*l) are evaluated through the analytic limit Z_t^2 / Z_L.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    zt = seg.characteristic_impedance
    bl = omega * seg.length / seg.phase_velocity
    t = math.tan(bl)
    if np.isinf(load):
        if abs(t) < _COS_POLE_EPS:
            return complex(np.inf)
        return zt / (1j * t)
    if abs(math.cos(bl)) < _COS_POLE_EPS:
        if load == 0:
            return complex(np.inf)
        return zt * zt / load
    return zt * (load + 1j * zt * t) / (zt + 1j * load * t)


def dcoupler_impedance(p: DCouplerParams, flux: FluxBias, omega: float) -> complex:
    """Series impedance of the coupler branch down to the cold load.

    Capacitor branch shunted by the parasitic resistance, in series with the
    SQUID-inductor/parasitic-capacitance tank and the load resistor.  At the
    tank resonance the branch is an open circuit and the returned value is inf.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    ld = flux.inductance(p.zero_flux_inductance)
    y_cap = 1j * omega * p.series_capacitance
    if not np.isinf(p.parasitic_resistance):
        y_cap = y_cap + 1.0 / p.parasitic_resistance
    z_cap = 1.0 / y_cap
    y_tank = 1.0 / (1j * omega * ld) + 1j * omega * p.parasitic_capacitance
    if y_tank == 0:
        return complex(np.inf)
    return z_cap + 1.0 / y_tank + p.load_resistance


def _parallel(a: complex, b: complex) -> complex:
    if a == 0 or b == 0:
        return 0.0
    ya = 0.0 if np.isinf(a) else 1.0 / a
    yb = 0.0 if np.isinf(b) else 1.0 / b
    y = ya + yb
    return complex(np.inf) if y == 0 else 1.0 / y


def input_impedance(net: CircuitNetwork, flux: FluxBias, omega: float,
                    side: str = "near") -> complex:
    """Impedance seen at a chip port through the full chain.

    ``side="near"`` looks through the near stub toward the coupler;
    ``side="far"`` evaluates the chain from the other chip, which must locate
    the same standing modes in the lossless network.
    """
    zd = dcoupler_impedance(net.dcoupler, flux, omega)
    if side == "near":
        z_node = _parallel(zd, segment_impedance(net.far_stub, 0.0, omega))
        z_cable = segment_impedance(net.cable, z_node, omega)
        return segment_impedance(net.near_stub, z_cable, omega)
    if side == "far":
        z_cable = segment_impedance(net.cable, segment_impedance(net.near_stub, 0.0, omega), omega)
        z_node = _parallel(zd, z_cable)
        return segment_impedance(net.far_stub, z_node, omega)
    raise ValueError(f"unknown side {side!r}")


def _im_zin(net, flux, omega, side):
    z = input_impedance(net, flux, omega, side)
    return float("inf") if np.isinf(z) else z.imag


def find_modes(net: CircuitNetwork, flux: FluxBias, band: tuple[float, float],
               off_flux: FluxBias | None = None, side: str = "near") -> list[ModeSolution]:
    """Standing modes in ``band`` (rad/s): positive-slope zeros of Im[Z_in].

    Zeros are bracketed on a grid of FSR/50 and refined by bisection to 1 kHz;
    the quality factor uses a 10 kHz central difference of the reactance.
    Shifts are reported against the same mode index at ``off_flux`` (zero when
    no reference flux is given).  Candidate roots with non-positive input
    resistance are discarded as pole artifacts.
    """
    lo, hi = band
    if not 0 < lo < hi:
        raise ValueError("band must satisfy 0 < lo < hi")
    step = net.ideal_fsr / 50.0
    grid = np.arange(lo, hi + step, step)
    vals = np.array([_im_zin(net, flux, w, side) for w in grid])

    ref: dict[int, float] = {}
    if off_flux is not None:
        for m in find_modes(net, off_flux, band, off_flux=None, side=side):
            ref[m.mode_index] = m.omega_m

    modes = []
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if not (np.isfinite(fa) and np.isfinite(fb) and fa < 0 <= fb):
            continue
        while b - a > _BISECT_TOL:
            m = 0.5 * (a + b)
            if _im_zin(net, flux, m, side) < 0:
                a = m
            else:
                b = m
        wm = 0.5 * (a + b)
        z0 = input_impedance(net, flux, wm, side)
        if not np.isfinite(z0.real) or z0.real <= -1e-9:
            continue
        dslope = (_im_zin(net, flux, wm + _FD_STEP, side)
                  - _im_zin(net, flux, wm - _FD_STEP, side)) / (2 * _FD_STEP)
        if not np.isfinite(dslope) or dslope <= 0:
            continue
        # a vanishing input resistance is a lossless mode, not a pole artifact
        q = math.inf if z0.real < 1e-12 else wm / z0.real * 0.5 * dslope
        idx = int(round(wm / net.ideal_fsr))
        shift = wm - ref[idx] if idx in ref else 0.0
        modes.append(ModeSolution(mode_index=idx, omega_m=wm, quality_factor=q,
                                  kappa=wm / q, freq_shift_vs_off=shift))
    return modes


def _mode_near(net, flux, target_omega, half_window=None, side="near"):
    if half_window is None:
        half_window = 0.6 * net.ideal_fsr
    band = (target_omega - half_window, target_omega + half_window)
    modes = find_modes(net, flux, band, side=side)
    if not modes:
        return None
    return min(modes, key=lambda m: abs(m.omega_m - target_omega))


def kappa_flux_sweep(net: CircuitNetwork, phi_ratios, target_omega: float):
    """kappa and frequency of the mode nearest ``target_omega`` per flux point.

    Returns (phi, omega_m, kappa) arrays; flux points where the mode leaves the
    search window are dropped.
    """
    out = []
    for phi in phi_ratios:
        m = _mode_near(net, FluxBias(phi), target_omega)
        if m is not None:
            out.append((phi, m.omega_m, m.kappa))
    arr = np.array(out)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def off_point_flux(net: CircuitNetwork, target_omega: float,
                   phi_grid=None) -> tuple[float, float]:
    """Flux minimizing coupler dissipation of the target mode; (phi, kappa).

    The minimum sits where the SQUID tank resonance blocks the branch; the
    default grid of 0.002 resolves the surrounding dip without stepping into
    the singular bottom.
    """
    if phi_grid is None:
        phi_grid = np.arange(0.300, 0.499, 0.002)
    phis, _, kappas = kappa_flux_sweep(net, phi_grid, target_omega)
    i = int(np.argmin(kappas))
    return float(phis[i]), float(kappas[i])


def on_point_flux(net: CircuitNetwork, target_omega: float,
                  phi_grid=None) -> tuple[float, float]:
    """Flux maximizing coupler dissipation of the target mode; (phi, kappa)."""
    if phi_grid is None:
        phi_grid = np.arange(0.250, 0.420, 0.002)
    phis, _, kappas = kappa_flux_sweep(net, phi_grid, target_omega)
    i = int(np.argmax(kappas))
    return float(phis[i]), float(kappas[i])
