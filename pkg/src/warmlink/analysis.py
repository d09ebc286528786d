"""Thermodynamic helpers, decay fitting, and steady-state occupancy scans."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import hbar, k as k_B
from scipy.optimize import curve_fit

from .dynamics import (
    Coupling, DensityMatrix, ModeParams, QubitParams, SystemModel,
    fock_cutoff, partial_trace, steady_state,
)

__all__ = [
    "ThermalPoint", "FitResult", "SteadyScanResult", "FitError",
    "bose_einstein", "effective_temperature", "fit_exponential",
    "fit_damped_sine", "steady_scan",
]


class FitError(RuntimeError):
    """Nonlinear fit failed to converge; carries residual diagnostics."""


@dataclass(frozen=True)
class ThermalPoint:
    frequency: float      # rad/s
    temperature: float    # K
    occupancy: float

    @classmethod
    def from_temperature(cls, frequency: float, temperature: float) -> "ThermalPoint":
        return cls(frequency, temperature, bose_einstein(frequency, temperature))

    @classmethod
    def from_occupancy(cls, frequency: float, occupancy: float) -> "ThermalPoint":
        return cls(frequency, effective_temperature(frequency, occupancy), occupancy)


@dataclass
class FitResult:
    amplitude: float
    rate: float                 # 1/s (inverse decay time)
    offset: float
    frequency: float | None = None   # rad/s, for damped oscillations
    phase: float | None = None
    residual_norm: float = 0.0

    @property
    def tau(self) -> float:
        return math.inf if self.rate == 0 else 1.0 / self.rate


def bose_einstein(frequency: float, temperature: float) -> float:
    """Mean thermal occupancy of a mode at the given angular frequency."""
    if frequency <= 0 or temperature <= 0:
        raise ValueError("frequency and temperature must be positive")
    x = hbar * frequency / (k_B * temperature)
    if x > 30:
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def effective_temperature(frequency: float, occupancy: float) -> float:
    """Temperature whose equilibrium occupancy matches the given value."""
    if frequency <= 0:
        raise ValueError("frequency must be positive")
    if occupancy <= 0:
        raise ValueError("occupancy must be positive")
    return hbar * frequency / (k_B * math.log1p(1.0 / occupancy))


def _check_series(times, values, min_len):
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != y.shape:
        raise ValueError("times and values must be matching 1-d arrays")
    if len(t) < min_len:
        raise ValueError(f"need at least {min_len} samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    return t, y


def fit_exponential(times, values) -> FitResult:
    """Least squares of A exp(-t/tau) + C, seeded from a log-linearization."""
    t, y = _check_series(times, values, 5)
    if np.ptp(y) < 1e-14 * max(1.0, np.max(np.abs(y))):
        return FitResult(amplitude=0.0, rate=0.0, offset=float(np.mean(y)))

    c0 = float(np.mean(y[max(1, int(0.9 * len(y))):]))
    a0 = float(y[0] - c0)
    resid = y - c0
    mask = np.sign(resid) == np.sign(a0 if a0 else 1.0)
    mask &= np.abs(resid) > 1e-12
    if mask.sum() >= 2:
        slope = np.polyfit(t[mask], np.log(np.abs(resid[mask])), 1)[0]
        tau0 = -1.0 / slope if slope < 0 else (t[-1] - t[0]) / 3.0
    else:
        tau0 = (t[-1] - t[0]) / 3.0
    tau0 = min(max(tau0, (t[1] - t[0]) * 0.1), (t[-1] - t[0]) * 100)

    def model(tt, a, tau, c):
        return a * np.exp(-tt / tau) + c

    try:
        popt, _ = curve_fit(model, t, y, p0=[a0 if a0 else np.ptp(y), tau0, c0],
                            bounds=([-np.inf, 1e-15, -np.inf], [np.inf, np.inf, np.inf]),
                            maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"exponential fit did not converge: {exc}") from exc
    resid_norm = float(np.linalg.norm(y - model(t, *popt)))
    return FitResult(amplitude=float(popt[0]), rate=1.0 / float(popt[1]),
                     offset=float(popt[2]), residual_norm=resid_norm)


def fit_damped_sine(times, values) -> FitResult:
    """A exp(-t/tau) cos(w t + phi) + C with the frequency seeded from a DFT peak.

    The peak is refined by parabolic interpolation and the starting phase
    taken from the peak bin; a few decay-time starting points guard against
    the multimodal landscape of long traces.
    """
    t, y = _check_series(times, values, 10)
    dt = float(np.mean(np.diff(t)))
    yc = y - np.mean(y)
    fft = np.fft.rfft(yc)
    spec = np.abs(fft)
    freqs = np.fft.rfftfreq(len(t), dt)
    if len(spec) < 3:
        raise FitError("series too short for a spectral seed")
    peak = 1 + int(np.argmax(spec[1:]))
    floor = np.median(spec[1:])
    if spec[peak] < 5.0 * max(floor, 1e-300):
        raise FitError("no spectral peak above the noise floor")
    f0 = freqs[peak]
    if 1 <= peak < len(spec) - 1:
        s0, s1, s2 = spec[peak - 1], spec[peak], spec[peak + 1]
        denom = s0 - 2 * s1 + s2
        if denom < 0:
            f0 = f0 + 0.5 * (s0 - s2) / denom * (freqs[1] - freqs[0])
    w0 = 2 * math.pi * f0
    span = t[-1] - t[0]
    if w0 * span < 2 * math.pi * 1.5:
        raise FitError("series must span at least 1.5 oscillation periods")
    phi0 = float(np.angle(fft[peak])) - w0 * t[0]

    def model(tt, a, tau, w, phi, c):
        return a * np.exp(-tt / tau) * np.cos(w * tt + phi) + c

    bounds = ([0.0, 1e-15, 0.5 * w0, -2 * math.pi, -np.inf],
              [np.inf, np.inf, 1.5 * w0, 2 * math.pi, np.inf])
    best = None
    for tau0 in (span / 4.0, span, 4.0 * span):
        p0 = [np.ptp(y) / 2.0, tau0, w0, phi0, float(np.mean(y))]
        try:
            popt, _ = curve_fit(model, t, y, p0=p0, bounds=bounds, maxfev=40000)
        except RuntimeError:
            continue
        resid = float(np.linalg.norm(y - model(t, *popt)))
        if best is None or resid < best[1]:
            best = (popt, resid)
    if best is None:
        raise FitError("damped-sine fit did not converge from any starting point")
    popt, resid_norm = best
    rate = 1.0 / float(popt[1])
    if rate < 1e-6 / span:
        rate = 0.0
    return FitResult(amplitude=float(popt[0]), rate=rate, offset=float(popt[4]),
                     frequency=float(popt[2]), phase=float(popt[3]),
                     residual_norm=resid_norm)


@dataclass
class SteadyScanResult:
    occupancy_grid: np.ndarray      # <N_c> axis
    kappa_grid: np.ndarray          # kappa_c axis
    pe_surface: np.ndarray          # shape (len(kappa_grid), len(occupancy_grid))
    target_pe: float
    contour: list[tuple[float, float]] = field(default_factory=list)  # (N_c, kappa_c)

    def occupancy_at(self, kappa_c: float, target: float | None = None) -> float:
        """Interpolated <N_c> where the surface crosses the target at kappa_c.

        The crossing is found on the row nearest ``kappa_c``; occupancies
        interpolate on a log axis.  A single crossing per row is asserted.
        """
        target = self.target_pe if target is None else target
        i = int(np.argmin(np.abs(self.kappa_grid - kappa_c)))
        row = self.pe_surface[i]
        above = row >= target
        crossings = np.nonzero(np.diff(above.astype(int)) != 0)[0]
        if len(crossings) == 0:
            raise ValueError(f"target {target} not crossed at kappa_c={kappa_c:g}")
        if len(crossings) > 1:
            raise ValueError("contour is not single-valued along this row")
        j = crossings[0]
        x0, x1 = np.log(self.occupancy_grid[j]), np.log(self.occupancy_grid[j + 1])
        y0, y1 = row[j], row[j + 1]
        return float(np.exp(x0 + (target - y0) * (x1 - x0) / (y1 - y0)))

    def occupancy_with_error(self, kappa_c: float, delta_pe: float = 0.01):
        """Star readout with error bars from re-extracting at target +- delta."""
        mid = self.occupancy_at(kappa_c)
        lo = self.occupancy_at(kappa_c, self.target_pe - delta_pe)
        hi = self.occupancy_at(kappa_c, self.target_pe + delta_pe)
        return mid, min(lo, hi), max(lo, hi)


def _marching_segments(xg, yg, surface, level):
    """Bilinear marching-squares segments of the level set, (x, y) pairs."""
    segs = []
    nz, nx = surface.shape
    for i in range(nz - 1):
        for j in range(nx - 1):
            corners = [
                (xg[j], yg[i], surface[i, j]),
                (xg[j + 1], yg[i], surface[i, j + 1]),
                (xg[j + 1], yg[i + 1], surface[i + 1, j + 1]),
                (xg[j], yg[i + 1], surface[i + 1, j]),
            ]
            pts = []
            for k in range(4):
                x0, y0, v0 = corners[k]
                x1, y1, v1 = corners[(k + 1) % 4]
                if (v0 - level) * (v1 - level) < 0:
                    f = (level - v0) / (v1 - v0)
                    pts.append((x0 + f * (x1 - x0), y0 + f * (y1 - y0)))
            if len(pts) == 2:
                segs.append((pts[0], pts[1]))
    return segs


def steady_scan(qubit: QubitParams, coupling_g: float, mode_frequency: float,
                occupancy_grid, kappa_grid, target_pe: float) -> SteadyScanResult:
    """Map the qubit's equilibrium excitation over mode-bath parameters.

    ``qubit`` fixes the probe's own bath; each grid point solves the coupled
    steady state at a cutoff adapted to the bath occupancy.
    """
    occ = np.asarray(occupancy_grid, dtype=float)
    kap = np.asarray(kappa_grid, dtype=float)
    if np.any(occ <= 0) or np.any(kap <= 0):
        raise ValueError("scan grids must be positive")
    surface = np.empty((len(kap), len(occ)))
    for i, kc in enumerate(kap):
        for j, nc in enumerate(occ):
            mode = ModeParams(frequency=mode_frequency, fock_cutoff=fock_cutoff(nc),
                              relaxation=kc, occupancy=nc)
            q = QubitParams(frequency=mode_frequency, anharmonicity=qubit.anharmonicity,
                            levels=qubit.levels, relaxation=qubit.relaxation,
                            occupancy=qubit.occupancy, pure_dephasing=qubit.pure_dephasing)
            model = SystemModel(qubits=(q,), mode=mode, coupling=Coupling((coupling_g,)))
            rho = steady_state(model.hamiltonian(), model.collapse_operators())
            rho = DensityMatrix(rho.matrix, model.dims)
            surface[i, j] = 1.0 - partial_trace(rho, (0,)).matrix[0, 0].real
    if surface.min() < -1e-9 or surface.max() > 1 + 1e-9:
        raise RuntimeError("P_e surface left [0, 1]")

    result = SteadyScanResult(occupancy_grid=occ, kappa_grid=kap,
                              pe_surface=surface, target_pe=target_pe)
    if surface.size == 1:
        if abs(surface[0, 0] - target_pe) < 1e-4:
            result.contour = [(float(occ[0]), float(kap[0]))]
        return result
    if not (surface.min() <= target_pe <= surface.max()):
        return result  # empty contour, flagged by its absence
    segs = _marching_segments(occ, kap, surface, target_pe)
    pts = sorted({p for seg in segs for p in seg}, key=lambda p: p[1])
    result.contour = [(float(x), float(y)) for x, y in pts]
    return result
