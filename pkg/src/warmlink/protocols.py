"""Time-domain experiments as piecewise-constant schedules over the link knobs.

Each protocol prepares an initial state, switches couplings and the channel
dissipation between segments, and records qubit excitation and mode occupancy
along the way.  State preparations are ideal unitaries (or replacements);
coupler switching is instantaneous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .dynamics import (
    Bath, Coupling, DensityMatrix, ModeParams, QubitParams, SystemModel,
    destroy, embed, evolve, excited_projector, fock_cutoff, ground_state,
    number_op, partial_trace, steady_state, thermal_state,
)

__all__ = [
    "ScheduleSegment", "ProtocolResult", "LinkModel", "run_schedule",
    "cooling_protocol", "rethermalization_protocol", "rabi_chevron_scan",
    "photon_transfer_protocol", "bell_protocol", "readout_reset_protocol",
    "optimize_transfer_time", "optimize_bell_timings", "qubit_pair_state",
    "cooled_qubit_state", "bell_target", "transfer_process_fidelity",
]

DT_CAP = 0.05e-9
PREP_KINDS = ("reset", "pi", "pi_half_y", "pi_half_x", "half_swap")


@dataclass(frozen=True)
class ScheduleSegment:
    """One piecewise-constant control interval."""

    duration: float
    g: tuple[float, ...]
    d_coupler: str = "off"                       # "on" | "off"
    qubit_detunings: tuple[float, ...] = ()
    initial_ops: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("segment duration must be non-negative")
        if self.d_coupler not in ("on", "off"):
            raise ValueError("d_coupler must be 'on' or 'off'")
        for kind, _ in self.initial_ops:
            if kind not in PREP_KINDS:
                raise ValueError(f"unknown preparation {kind!r}")


@dataclass
class ProtocolResult:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    final: DensityMatrix
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LinkModel:
    """Two qubits on a shared mode whose bath switches with the cooling coupler."""

    qubit_a: QubitParams
    qubit_b: QubitParams | None
    mode_frequency: float
    g_a: float
    g_b: float
    bath_on: Bath     # mode bath with the dissipation coupler on
    bath_off: Bath    # coupler off: intrinsic loss against the warm environment

    def qubits(self, which: str = "both") -> tuple[QubitParams, ...]:
        if which == "a" or self.qubit_b is None:
            return (self.qubit_a,)
        if which == "b":
            return (self.qubit_b,)
        return (self.qubit_a, self.qubit_b)

    def mode_bath(self, d_coupler: str) -> Bath:
        return self.bath_on if d_coupler == "on" else self.bath_off

    def default_cutoff(self, d_coupler: str) -> int:
        return fock_cutoff(self.mode_bath(d_coupler).occupancy)

    def system(self, *, which: str = "both", g: tuple[float, ...] | None = None,
               d_coupler: str = "off", cutoff: int | None = None,
               detunings: tuple[float, ...] | None = None) -> SystemModel:
        qs = self.qubits(which)
        bath = self.mode_bath(d_coupler)
        if g is None:
            g = {"a": (self.g_a,), "b": (self.g_b,)}.get(which, (self.g_a, self.g_b))
            g = g[: len(qs)]
        if detunings is not None:
            qs = tuple(replace(q, frequency=self.mode_frequency + d)
                       for q, d in zip(qs, detunings))
        else:
            qs = tuple(replace(q, frequency=self.mode_frequency) for q in qs)
        n_max = cutoff or self.default_cutoff(d_coupler)
        mode = ModeParams(frequency=self.mode_frequency, fock_cutoff=n_max,
                          relaxation=bath.kappa, occupancy=bath.occupancy,
                          transient=n_max < fock_cutoff(bath.occupancy))
        return SystemModel(qubits=qs, mode=mode, coupling=Coupling(tuple(g)))

    def lossless(self) -> "LinkModel":
        strip = lambda q: replace(q, relaxation=0.0, occupancy=0.0, pure_dephasing=0.0)
        return replace(self, qubit_a=strip(self.qubit_a),
                       qubit_b=strip(self.qubit_b) if self.qubit_b else None,
                       bath_on=Bath(0.0, 0.0), bath_off=Bath(0.0, 0.0))


def stable_timestep(model: SystemModel) -> float:
    """min(50 ps, 0.02 / fastest of detunings, couplings and thermal rates)."""
    frame = model.frame
    rates = [abs(q.frequency - frame) for q in model.qubits]
    rates.append(abs(model.mode.frequency - frame))
    rates.extend(abs(g) for g in model.coupling.g)
    for q in model.qubits:
        rates.append(q.relaxation * (q.occupancy + 1.0))
    rates.append(model.mode.relaxation * (model.mode.occupancy + 1.0))
    fastest = max(rates)
    return DT_CAP if fastest == 0 else min(DT_CAP, 0.02 / fastest)


def _block_unitary(levels: int, block: np.ndarray) -> np.ndarray:
    u = np.eye(levels, dtype=complex)
    u[:2, :2] = block
    return u


def _prep_unitary(kind: str, dims: tuple[int, ...], site: int) -> np.ndarray | None:
    lv = dims[site]
    s = 1.0 / math.sqrt(2.0)
    if kind == "pi":
        blk = np.array([[0, 1], [1, 0]], dtype=complex)
    elif kind == "pi_half_y":
        blk = np.array([[s, -s], [s, s]], dtype=complex)
    elif kind == "pi_half_x":
        blk = np.array([[s, 1j * s], [1j * s, s]], dtype=complex)
    elif kind == "half_swap":
        a = embed(destroy(dims[-1]), dims, len(dims) - 1)
        sq = embed(destroy(lv), dims, site)
        hswap = (sq.conj().T @ a + sq @ a.conj().T).toarray()
        return scipy.linalg.expm(-1j * (math.pi / 4.0) * hswap)
    else:
        return None
    return embed(sp.csr_matrix(_block_unitary(lv, blk)), dims, site).toarray()


def _apply_prep(rho: DensityMatrix, kind: str, site: int) -> DensityMatrix:
    dims = rho.dims
    if kind == "reset":
        n = len(dims)
        rest = tuple(i for i in range(n) if i != site)
        reduced = partial_trace(rho, rest).matrix.reshape(
            tuple(dims[i] for i in rest) * 2)
        gnd = np.zeros((dims[site], dims[site]), dtype=complex)
        gnd[0, 0] = 1.0
        letters = "abcdefghijkl"
        sub_rest = [letters[i] for i in rest] + [letters[n + i] for i in rest]
        sub_site = [letters[site], letters[n + site]]
        out = [letters[i] for i in range(n)] + [letters[n + i] for i in range(n)]
        expr = "".join(sub_rest) + "," + "".join(sub_site) + "->" + "".join(out)
        d = int(np.prod(dims))
        return DensityMatrix(np.einsum(expr, reduced, gnd).reshape(d, d), dims)
    u = _prep_unitary(kind, dims, site)
    return DensityMatrix(u @ rho.matrix @ u.conj().T, dims)


def default_observables(dims: tuple[int, ...], n_qubits: int) -> dict[str, sp.csr_matrix]:
    obs = {}
    for i in range(n_qubits):
        obs[f"pe_q{i}"] = excited_projector(dims, i)
    obs["mode_n"] = number_op(dims, n_qubits)
    return obs


def run_schedule(link: LinkModel, schedule: list[ScheduleSegment], rho0: DensityMatrix,
                 which: str = "both", cutoff: int | None = None,
                 sample_interval: float = 1e-9) -> ProtocolResult:
    """Apply preparations and evolve each segment, keeping state continuity."""
    rho = DensityMatrix(rho0.matrix.copy(), rho0.dims)
    n_q = len(link.qubits(which))
    obs = default_observables(rho.dims, n_q)

    times: list[np.ndarray] = []
    series: dict[str, list[np.ndarray]] = {k: [] for k in obs}
    t_off = 0.0

    def record_start():
        times.append(np.array([0.0]))
        for k, op in obs.items():
            series[k].append(np.array([rho.expectation(op)]))

    for seg in schedule:
        for kind, site in seg.initial_ops:
            rho = _apply_prep(rho, kind, site)
        if not times:
            record_start()
        if seg.duration == 0:
            continue
        det = seg.qubit_detunings or tuple(0.0 for _ in range(n_q))
        model = link.system(which=which, g=seg.g, d_coupler=seg.d_coupler,
                            cutoff=cutoff or rho.dims[-1], detunings=det)
        dt = stable_timestep(model)
        traj = evolve(rho, model.hamiltonian(), model.collapse_operators(),
                      seg.duration, dt, sample_interval=sample_interval,
                      observables=obs)
        rho = traj.final
        times.append(traj.times[1:] + t_off)
        for k in obs:
            series[k].append(traj.observables[k][1:])
        t_off += seg.duration

    if not times:
        record_start()
    result = ProtocolResult(
        times=np.concatenate(times),
        observables={k: np.concatenate(v) for k, v in series.items()},
        final=rho,
    )
    for name, vals in result.observables.items():
        if name.startswith("pe_") and (vals.min() < -1e-7 or vals.max() > 1 + 1e-7):
            raise RuntimeError(f"observable {name} left [0, 1]")
        if name == "mode_n" and vals.min() < -1e-7:
            raise RuntimeError("negative mode occupancy")
    return result


# ---------------------------------------------------------------- initial states

def cooled_qubit_state(link: LinkModel, which: str) -> np.ndarray:
    """Reduced qubit state after equilibrating with the radiatively cooled mode.

    Solved per qubit (coupler on, exchange active); cooling each qubit alone
    avoids the dark state of the symmetric two-qubit configuration.
    """
    model = link.system(which=which, d_coupler="on")
    ops = model.collapse_operators()
    if not ops:
        gnd = np.zeros((model.dims[0], model.dims[0]), dtype=complex)
        gnd[0, 0] = 1.0
        return gnd
    rho = steady_state(model.hamiltonian(), ops)
    wrapped = DensityMatrix(rho.matrix, model.dims)
    return partial_trace(wrapped, (0,)).matrix


def cooled_link_state(link: LinkModel, cutoff: int) -> DensityMatrix:
    """Product of separately cooled qubits and the cooled thermal mode."""
    parts = [cooled_qubit_state(link, "a")]
    dims = [link.qubit_a.levels]
    if link.qubit_b is not None:
        parts.append(cooled_qubit_state(link, "b"))
        dims.append(link.qubit_b.levels)
    parts.append(thermal_state(cutoff, link.bath_on.occupancy))
    dims.append(cutoff)
    m = parts[0]
    for p in parts[1:]:
        m = np.kron(m, p)
    return DensityMatrix(m, tuple(dims))


def thermal_idle_state(link: LinkModel, cutoff: int, mode_occupancy: float,
                       which: str = "a") -> DensityMatrix:
    """Decoupled equilibrium: each qubit thermal at its own bath, mode thermal."""
    parts, dims = [], []
    for q in link.qubits(which):
        parts.append(thermal_state(q.levels, q.occupancy))
        dims.append(q.levels)
    parts.append(thermal_state(cutoff, mode_occupancy))
    dims.append(cutoff)
    m = parts[0]
    for p in parts[1:]:
        m = np.kron(m, p)
    return DensityMatrix(m, tuple(dims))


# ---------------------------------------------------------------- protocols

def cooling_protocol(link: LinkModel, duration: float = 400e-9,
                     sample_interval: float = 2e-9) -> ProtocolResult:
    """Qubit starts at its warm decoupled equilibrium, then exchanges with the
    cooled mode while the dissipation coupler stays on."""
    cutoff = link.default_cutoff("on")
    rho0 = thermal_idle_state(link, cutoff, link.bath_on.occupancy, which="a")
    seg = ScheduleSegment(duration=duration, g=(link.g_a,), d_coupler="on")
    return run_schedule(link, [seg], rho0, which="a", cutoff=cutoff,
                        sample_interval=sample_interval)


def rethermalization_protocol(link: LinkModel, duration: float = 4e-6,
                              coupled: bool = True,
                              sample_interval: float = 40e-9) -> ProtocolResult:
    """Ground-state system heating up with the coupler off.

    ``coupled=False`` leaves the exchange off and only the qubit bath acts;
    ``coupled=True`` has the qubit track the rethermalizing mode.
    """
    if coupled:
        cutoff = link.default_cutoff("off")
        rho0 = ground_state((link.qubit_a.levels, cutoff))
        seg = ScheduleSegment(duration=duration, g=(link.g_a,), d_coupler="off")
        return run_schedule(link, [seg], rho0, which="a", cutoff=cutoff,
                            sample_interval=sample_interval)
    # decoupled variant: mode is irrelevant, keep it frozen and tiny
    frozen = replace(link, bath_off=Bath(0.0, 0.0))
    rho0 = ground_state((link.qubit_a.levels, 2))
    seg = ScheduleSegment(duration=duration, g=(0.0,), d_coupler="off")
    return run_schedule(frozen, [seg], rho0, which="a", cutoff=2,
                        sample_interval=sample_interval)


def rabi_chevron_scan(link: LinkModel, detunings, duration: float = 250e-9,
                      sample_interval: float = 1e-9, warm: bool = False):
    """P_e(detuning, t) map of exchange oscillations against the mode.

    Cold variant: qubit flipped to |1> against the cooled mode.  Warm variant:
    qubit starts in the ground state and detects thermal photons already in
    the channel.
    """
    cutoff = max(link.default_cutoff("off") if warm else 10, 10)
    maps = []
    times = None
    for d in detunings:
        if warm:
            gq = np.zeros((link.qubit_a.levels, link.qubit_a.levels), dtype=complex)
            gq[0, 0] = 1.0
            rho0 = DensityMatrix(
                np.kron(gq, thermal_state(cutoff, link.bath_off.occupancy)),
                (link.qubit_a.levels, cutoff))
            ops = ()
        else:
            rho0 = DensityMatrix(
                np.kron(cooled_qubit_state(link, "a"),
                        thermal_state(cutoff, link.bath_on.occupancy)),
                (link.qubit_a.levels, cutoff))
            ops = (("pi", 0),)
        seg = ScheduleSegment(duration=duration, g=(link.g_a,), d_coupler="off",
                              qubit_detunings=(d,), initial_ops=ops)
        res = run_schedule(link, [seg], rho0, which="a", cutoff=cutoff,
                           sample_interval=sample_interval)
        maps.append(res.observables["pe_q0"])
        times = res.times
    return times, np.array(maps)


def photon_transfer_protocol(link: LinkModel, transfer_time: float,
                             input_prep: tuple[tuple[str, int], ...] = (("pi", 0),),
                             cutoff: int = 12,
                             sample_interval: float = 1e-9) -> ProtocolResult:
    """Release-and-catch with both exchanges on and the coupler off."""
    rho0 = cooled_link_state(link, cutoff)
    seg = ScheduleSegment(duration=transfer_time, g=(link.g_a, link.g_b),
                          d_coupler="off", initial_ops=input_prep)
    res = run_schedule(link, [seg], rho0, cutoff=cutoff,
                       sample_interval=sample_interval)
    res.meta["transfer_time"] = transfer_time
    return res


def bell_protocol(link: LinkModel, t_release: float, t_catch: float,
                  cutoff: int = 12, sample_interval: float = 1e-9) -> ProtocolResult:
    """Half release from the sender, then a full catch by the receiver."""
    rho0 = cooled_link_state(link, cutoff)
    segs = [
        ScheduleSegment(duration=t_release, g=(link.g_a, 0.0), d_coupler="off",
                        initial_ops=(("pi", 0),)),
        ScheduleSegment(duration=t_catch, g=(0.0, link.g_b), d_coupler="off"),
    ]
    res = run_schedule(link, segs, rho0, cutoff=cutoff,
                       sample_interval=sample_interval)
    res.meta["timings"] = (t_release, t_catch)
    return res


def readout_reset_protocol(qubit: QubitParams, duration: float = 1e-6,
                           resonator_kappa: float = 1.0 / 60e-9,
                           resonator_occupancy: float = 0.0,
                           swap_period: float = 3.2e-9,
                           resonator_frequency: float = 2 * np.pi * 5.963e9,
                           sample_interval: float = 0.4e-9) -> ProtocolResult:
    """Qubit flipped to |1> and dumped through its lossy readout resonator."""
    g_rr = math.pi / swap_period
    mode = ModeParams(frequency=resonator_frequency, fock_cutoff=10,
                      relaxation=resonator_kappa, occupancy=resonator_occupancy)
    q = replace(qubit, frequency=resonator_frequency)
    model = SystemModel(qubits=(q,), mode=mode, coupling=Coupling((g_rr,)))
    dims = model.dims
    rho0 = ground_state(dims)
    rho0 = _apply_prep(rho0, "pi", 0)
    dt = stable_timestep(model)
    obs = default_observables(dims, 1)
    traj = evolve(rho0, model.hamiltonian(), model.collapse_operators(),
                  duration, dt, sample_interval=sample_interval, observables=obs)
    return ProtocolResult(times=traj.times, observables=traj.observables,
                          final=traj.final, meta={"swap_period": swap_period})


def resonator_occupancy_for_target(qubit: QubitParams, target_pe: float,
                                   resonator_kappa: float = 1.0 / 60e-9,
                                   swap_period: float = 3.2e-9,
                                   resonator_frequency: float = 2 * np.pi * 5.963e9,
                                   tol: float = 1e-4) -> float:
    """Resonator bath occupancy whose reset equilibrium matches ``target_pe``."""
    g_rr = math.pi / swap_period

    def pe(n_res):
        mode = ModeParams(frequency=resonator_frequency, fock_cutoff=10,
                          relaxation=resonator_kappa, occupancy=n_res)
        q = replace(qubit, frequency=resonator_frequency)
        model = SystemModel(qubits=(q,), mode=mode, coupling=Coupling((g_rr,)))
        rho = steady_state(model.hamiltonian(), model.collapse_operators())
        rho = DensityMatrix(rho.matrix, model.dims)
        return 1.0 - partial_trace(rho, (0,)).matrix[0, 0].real

    lo, hi = 0.0, 2.0
    if pe(lo) > target_pe:
        raise ValueError("target below the floor set by the qubit's own bath")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if pe(mid) < target_pe:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- read-outs

def bell_target() -> np.ndarray:
    psi = np.zeros(4, dtype=complex)
    psi[1] = psi[2] = 1.0 / math.sqrt(2.0)
    return psi


def qubit_pair_state(final: DensityMatrix, receiver_z: int | None = 1) -> tuple[DensityMatrix, float]:
    """Two-qubit computational-subspace state and the discarded leakage weight.

    Applies the deterministic frame alignment of the receiving qubit (a pi
    phase accumulated by the released-and-caught photon) unless disabled.
    """
    pair = partial_trace(final, (0, 1))
    la, lb = pair.dims
    m = pair.matrix.reshape(la, lb, la, lb)[:2, :2, :2, :2].reshape(4, 4)
    weight = np.trace(m).real
    leakage = 1.0 - weight
    m = m / weight
    if receiver_z is not None:
        z = np.diag([1.0, -1.0]).astype(complex)
        u = np.kron(np.eye(2), z) if receiver_z == 1 else np.kron(z, np.eye(2))
        m = u @ m @ u.conj().T
    return DensityMatrix(m, (2, 2)), leakage


def _bell_fidelity(final: DensityMatrix) -> float:
    rho, _ = qubit_pair_state(final)
    psi = bell_target()
    return float(np.real(psi.conj() @ rho.matrix @ psi))


def transfer_process_fidelity(link: LinkModel, transfer_time: float, cutoff: int = 12,
                              confusion=None, correct: bool = True):
    """Process matrix and fidelity of the transfer channel at one timing."""
    from .tomography import process_tomography

    def run_for(prep):
        res = photon_transfer_protocol(link, transfer_time, input_prep=prep, cutoff=cutoff)
        pair, _ = qubit_pair_state(res.final)
        return partial_trace(pair, (1,))

    return process_tomography(run_for, confusion=confusion, correct=correct)


def optimize_transfer_time(link: LinkModel, span: tuple[float, float] = (40e-9, 100e-9),
                           cutoff: int = 12) -> tuple[float, float]:
    """Time of maximum receiver excitation for a released photon; (t, P_e)."""
    res = photon_transfer_protocol(link, span[1], cutoff=cutoff)
    pe = res.observables["pe_q1"]
    mask = res.times >= span[0]
    times = res.times[mask]
    vals = pe[mask]
    idx = int(np.argmax(vals))
    t_star, p_star = float(times[idx]), float(vals[idx])
    if 0 < idx < len(vals) - 1:
        # parabolic refinement through the grid maximum
        y0, y1, y2 = vals[idx - 1], vals[idx], vals[idx + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            shift = 0.5 * (y0 - y2) / denom
            h = times[idx + 1] - times[idx]
            t_star = float(times[idx] + shift * h)
            p_star = float(y1 - 0.25 * (y0 - y2) * shift)
    return t_star, p_star


def optimize_bell_timings(link: LinkModel, release_span: tuple[float, float] = (15e-9, 35e-9),
                          catch_span: tuple[float, float] = (20e-9, 60e-9),
                          grid: float = 1e-9, cutoff: int = 12) -> tuple[float, float, float]:
    """1 ns grid search of the two stage durations maximizing Bell fidelity.

    Runs against the supplied link (thermal or lossless): the release stage is
    sampled once, then each candidate release state is propagated through the
    catch stage, reusing the trajectory for every candidate catch duration.
    """
    from . import engine
    from .dynamics import liouvillian

    rho0 = cooled_link_state(link, cutoff)
    rho0 = _apply_prep(rho0, "pi", 0)
    dims = rho0.dims
    d = rho0.matrix.shape[0]

    def stage_setup(g):
        model = link.system(g=g, d_coupler="off", cutoff=cutoff)
        L = liouvillian(model.hamiltonian(), model.collapse_operators())
        dt = stable_timestep(model)
        per_grid = max(1, int(round(grid / dt)))
        return L, grid / per_grid, per_grid

    L_r, dt_r, m_r = stage_setup((link.g_a, 0.0))
    L_c, dt_c, m_c = stage_setup((0.0, link.g_b))

    n_rel = int(round((release_span[1] - release_span[0]) / grid))
    n_cat = int(round((catch_span[1] - catch_span[0]) / grid))
    lead_steps = int(round(release_span[0] / grid)) * m_r
    v = rho0.matrix.reshape(-1)
    if lead_steps:
        v = engine.propagate(L_r, v, dt_r, lead_steps, lead_steps)[-1]
    release = engine.propagate(L_r, v, dt_r, n_rel * m_r, m_r)

    def fid(vec):
        return _bell_fidelity(DensityMatrix(vec.reshape(d, d), dims))

    best = (release_span[0], catch_span[0], -1.0)
    for i in range(release.shape[0]):
        t1 = release_span[0] + i * grid
        v = release[i]
        lead_c = int(round(catch_span[0] / grid)) * m_c
        if lead_c:
            v = engine.propagate(L_c, v, dt_c, lead_c, lead_c)[-1]
        catch = engine.propagate(L_c, v, dt_c, n_cat * m_c, m_c)
        for j in range(catch.shape[0]):
            f = fid(catch[j])
            if f > best[2]:
                best = (t1, catch_span[0] + j * grid, f)
    return best
