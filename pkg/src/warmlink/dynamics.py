"""Truncated qubit-qubit-mode model and its open-system dynamics.

Qubits are weakly anharmonic ladders, the channel is one bosonic mode, and
every component relaxes toward its own thermal bath through paired
raising/lowering jump operators.  All frequencies are angular (rad/s), all
times seconds; dynamics run in a frame rotating at a common reference
frequency so that only detunings enter the generator.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import engine

__all__ = [
    "QubitParams", "ModeParams", "Coupling", "Bath", "DensityMatrix",
    "SystemModel", "Trajectory", "destroy", "embed", "thermal_state",
    "fock_cutoff", "build_hamiltonian", "build_collapse_operators",
    "merge_baths", "liouvillian", "evolve", "steady_state", "expectation",
    "partial_trace", "ground_state",
]

log = logging.getLogger(__name__)

TRACE_TOL = 1e-8
HERM_TOL = 1e-10
EIG_FLOOR = -1e-7
RENORM_DRIFT = 1e-6
NEGATIVITY_ABORT = -1e-5


@dataclass(frozen=True)
class Bath:
    """Thermal reservoir: coupling rate and mean occupancy."""

    kappa: float
    occupancy: float

    def __post_init__(self):
        if self.kappa < 0 or self.occupancy < 0:
            raise ValueError("bath kappa and occupancy must be non-negative")


@dataclass(frozen=True)
class QubitParams:
    frequency: float            # rad/s
    anharmonicity: float        # rad/s, negative for a transmon-like ladder
    levels: int = 3
    relaxation: float = 0.0     # kappa_n, 1/s
    occupancy: float = 0.0      # bath <N_n>
    pure_dephasing: float = 0.0  # Gamma_phi, 1/s

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("qubit needs at least 2 levels")
        if self.relaxation < 0 or self.occupancy < 0 or self.pure_dephasing < 0:
            raise ValueError("rates and occupancies must be non-negative")

    @property
    def bath(self) -> Bath:
        return Bath(self.relaxation, self.occupancy)


@dataclass(frozen=True)
class ModeParams:
    frequency: float        # rad/s
    fock_cutoff: int
    relaxation: float = 0.0  # kappa_c, 1/s
    occupancy: float = 0.0   # bath <N_c>
    transient: bool = False  # cutoff sized for a short transient, not equilibrium

    def __post_init__(self):
        if self.fock_cutoff < 2:
            raise ValueError("fock_cutoff must be at least 2")
        if self.relaxation < 0 or self.occupancy < 0:
            raise ValueError("rates and occupancies must be non-negative")
        if self.occupancy > 0:
            tail = (self.occupancy / (self.occupancy + 1.0)) ** self.fock_cutoff
            if tail >= 1e-3:
                if not self.transient:
                    raise ValueError(
                        f"fock_cutoff={self.fock_cutoff} leaves a truncated thermal tail "
                        f"{tail:.2e} >= 1e-3 at occupancy {self.occupancy}"
                    )
                log.debug("transient cutoff %d below the equilibrium rule at occupancy %.3g",
                          self.fock_cutoff, self.occupancy)

    @property
    def bath(self) -> Bath:
        return Bath(self.relaxation, self.occupancy)


@dataclass(frozen=True)
class Coupling:
    """Exchange coupling strengths between each qubit and the mode, rad/s."""

    g: tuple[float, ...]

    def __post_init__(self):
        if any(isinstance(x, complex) for x in self.g):
            raise ValueError("couplings must be real")


@dataclass(frozen=True)
class SystemModel:
    """Everything needed to build the generator for one configuration."""

    qubits: tuple[QubitParams, ...]
    mode: ModeParams
    coupling: Coupling
    rotating_frame_freq: float | None = None

    def __post_init__(self):
        if not 1 <= len(self.qubits) <= 2:
            raise ValueError("model supports one or two qubits")
        if len(self.coupling.g) != len(self.qubits):
            raise ValueError("one coupling per qubit required")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(q.levels for q in self.qubits) + (self.mode.fock_cutoff,)

    @property
    def frame(self) -> float:
        return self.mode.frequency if self.rotating_frame_freq is None else self.rotating_frame_freq

    def with_mode_bath(self, bath: Bath) -> "SystemModel":
        return replace(self, mode=replace(self.mode, relaxation=bath.kappa,
                                          occupancy=bath.occupancy))

    def with_couplings(self, *g: float) -> "SystemModel":
        return replace(self, coupling=Coupling(tuple(g)))

    def with_detunings(self, *detunings: float) -> "SystemModel":
        qs = tuple(replace(q, frequency=self.mode.frequency + d)
                   for q, d in zip(self.qubits, detunings))
        return replace(self, qubits=qs)

    def hamiltonian(self) -> sp.csr_matrix:
        return build_hamiltonian(self.qubits, self.mode, self.coupling, self.frame)

    def collapse_operators(self) -> list[sp.csr_matrix]:
        return build_collapse_operators(self.qubits, self.mode)


@dataclass
class DensityMatrix:
    """Dense state on the tensor space; subsystem order is fixed qubits-then-mode."""

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        d = int(np.prod(self.dims))
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match dims {self.dims}")

    def validate(self, check_positivity: bool = True) -> "DensityMatrix":
        m = self.matrix
        if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
            raise ValueError(f"trace deviates from one by {np.trace(m) - 1.0:.3e}")
        herm = np.max(np.abs(m - m.conj().T))
        if herm > HERM_TOL:
            raise ValueError(f"hermiticity violation {herm:.3e}")
        if check_positivity:
            lo = float(np.linalg.eigvalsh(m)[0])
            if lo < EIG_FLOOR:
                raise ValueError(f"negative eigenvalue {lo:.3e}")
        return self

    def partial_trace(self, keep: tuple[int, ...]) -> "DensityMatrix":
        return partial_trace(self, keep)

    def expectation(self, op) -> float:
        return expectation(self, op)


@dataclass
class Trajectory:
    """Sampled master-equation solution."""

    times: np.ndarray
    states: list[DensityMatrix] = field(default_factory=list)
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    final: DensityMatrix | None = None


def destroy(n: int) -> sp.csr_matrix:
    """Ladder lowering operator with sqrt(n) matrix elements."""
    return sp.diags(np.sqrt(np.arange(1, n)), 1, format="csr", dtype=complex)


def embed(op: sp.spmatrix, dims: tuple[int, ...], site: int) -> sp.csr_matrix:
    """Lift a single-site operator to the full tensor space."""
    mats = [sp.identity(d, format="csr", dtype=complex) for d in dims]
    mats[site] = op.tocsr()
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def number_op(dims: tuple[int, ...], site: int) -> sp.csr_matrix:
    a = destroy(dims[site])
    return embed((a.conj().T @ a).tocsr(), dims, site)


def excited_projector(dims: tuple[int, ...], site: int) -> sp.csr_matrix:
    """Projector onto all levels above ground for one subsystem."""
    proj = sp.diags(np.r_[0.0, np.ones(dims[site] - 1)], 0, format="csr", dtype=complex)
    return embed(proj, dims, site)


def thermal_state(dim: int, occupancy: float) -> np.ndarray:
    """Truncated geometric (thermal) state of a single ladder."""
    if occupancy < 0:
        raise ValueError("occupancy must be non-negative")
    if occupancy == 0:
        p = np.zeros(dim)
        p[0] = 1.0
    else:
        r = occupancy / (occupancy + 1.0)
        p = r ** np.arange(dim)
        p /= p.sum()
    return np.diag(p).astype(complex)


def ground_state(dims: tuple[int, ...]) -> DensityMatrix:
    d = int(np.prod(dims))
    m = np.zeros((d, d), dtype=complex)
    m[0, 0] = 1.0
    return DensityMatrix(m, tuple(dims))


def fock_cutoff(occupancy: float, tail: float = 1e-3, floor: int = 10) -> int:
    """Smallest cutoff keeping the truncated thermal tail below ``tail``."""
    if occupancy <= 0:
        return floor
    n = math.ceil(math.log(tail) / math.log(occupancy / (occupancy + 1.0)))
    return max(floor, n)


def build_hamiltonian(qubits, mode: ModeParams, coupling: Coupling,
                      rotating_frame_freq: float) -> sp.csr_matrix:
    """H/hbar in the rotating frame: detunings, ladder anharmonicity, exchange."""
    qubits = tuple(qubits)
    dims = tuple(q.levels for q in qubits) + (mode.fock_cutoff,)
    wmin = min([q.frequency for q in qubits] + [mode.frequency])
    for g in coupling.g:
        if abs(g) >= 0.1 * wmin:
            raise ValueError("coupling strengths must stay well below the mode frequencies")
    d = int(np.prod(dims))
    H = sp.csr_matrix((d, d), dtype=complex)
    a_mode = embed(destroy(mode.fock_cutoff), dims, len(qubits))
    H = H + (mode.frequency - rotating_frame_freq) * (a_mode.conj().T @ a_mode)
    for i, (q, g) in enumerate(zip(qubits, coupling.g)):
        s = embed(destroy(q.levels), dims, i)
        n = (s.conj().T @ s).tocsr()
        H = H + (q.frequency - rotating_frame_freq) * n
        H = H + (q.anharmonicity / 2.0) * (s.conj().T @ s.conj().T @ s @ s)
        if g != 0.0:
            H = H + g * (s.conj().T @ a_mode + s @ a_mode.conj().T)
    return H.tocsr()


def build_collapse_operators(qubits, mode: ModeParams) -> list[sp.csr_matrix]:
    """Thermal jump pairs plus optional pure dephasing; zero-rate ops omitted."""
    qubits = tuple(qubits)
    dims = tuple(q.levels for q in qubits) + (mode.fock_cutoff,)
    ops: list[sp.csr_matrix] = []

    def add_thermal(lower, bath: Bath):
        down = bath.kappa * (bath.occupancy + 1.0)
        up = bath.kappa * bath.occupancy
        if down < 0 or up < 0:
            raise ValueError("negative jump rate")
        if down > 0:
            ops.append(math.sqrt(down) * lower)
        if up > 0:
            ops.append(math.sqrt(up) * lower.conj().T.tocsr())

    for i, q in enumerate(qubits):
        s = embed(destroy(q.levels), dims, i)
        if q.pure_dephasing < 0:
            raise ValueError("negative dephasing rate")
        if q.pure_dephasing > 0:
            ops.append(math.sqrt(q.pure_dephasing / 2.0) * (s.conj().T @ s).tocsr())
        add_thermal(s, q.bath)
    add_thermal(embed(destroy(mode.fock_cutoff), dims, len(qubits)), mode.bath)
    return ops


def merge_baths(baths) -> Bath:
    """Rate-weighted merge of several reservoirs acting on one element."""
    baths = list(baths)
    if not baths:
        raise ValueError("at least one bath required")
    total = sum(b.kappa for b in baths)
    if total == 0:
        raise ValueError("all-zero kappa leaves the merged occupancy undefined")
    occ = sum(b.kappa * b.occupancy for b in baths) / total
    return Bath(total, occ)


def liouvillian(H: sp.spmatrix, collapse_ops) -> sp.csr_matrix:
    """Vectorized generator (row-major convention: vec(A rho B) = kron(A, B^T) vec rho)."""
    d = H.shape[0]
    eye = sp.identity(d, format="csr", dtype=complex)
    L = -1j * (sp.kron(H, eye) - sp.kron(eye, H.T))
    for C in collapse_ops:
        C = C.tocsr()
        cdc = (C.conj().T @ C).tocsr()
        L = L + sp.kron(C, C.conj()) - 0.5 * (sp.kron(cdc, eye) + sp.kron(eye, cdc.T))
    return L.tocsr()


def evolve(rho0: DensityMatrix, H: sp.spmatrix, collapse_ops, duration: float,
           dt: float, sample_interval: float | None = None,
           observables: dict[str, sp.spmatrix] | None = None,
           keep_states: bool = False) -> Trajectory:
    """Fixed-step RK4 integration of the master equation.

    Samples every ``sample_interval`` (defaults to the full duration).  When
    ``observables`` is given only their expectation values are stored along
    the trajectory; otherwise sampled states are kept if ``keep_states``.
    Each sample is checked for trace drift and hermiticity; drift below
    1e-6 is renormalized away, anything larger aborts with a step-size hint.
    """
    if duration < 0 or dt <= 0:
        raise ValueError("need duration >= 0 and dt > 0")
    d = rho0.matrix.shape[0]
    if H.shape[0] != d:
        raise ValueError("Hamiltonian dimension does not match the state")
    L = liouvillian(H, collapse_ops)

    if duration == 0:
        rho = DensityMatrix(rho0.matrix.copy(), rho0.dims)
        traj = Trajectory(times=np.array([0.0]), final=rho)
        if observables:
            traj.observables = {k: np.array([expectation(rho, op)]) for k, op in observables.items()}
        if keep_states and not observables:
            traj.states = [rho]
        return traj

    if sample_interval is None:
        sample_interval = duration
    stride = max(1, int(round(sample_interval / dt)))
    n_steps = max(1, int(math.ceil(duration / dt)))
    n_steps = int(math.ceil(n_steps / stride) * stride)
    dt_eff = duration / n_steps

    samples = engine.propagate(L, rho0.matrix.reshape(-1), dt_eff, n_steps, stride)
    times = np.arange(samples.shape[0]) * (stride * dt_eff)

    traj = Trajectory(times=times)
    obs_acc: dict[str, list[float]] = {k: [] for k in (observables or {})}
    for i in range(samples.shape[0]):
        m = samples[i].reshape(d, d)
        tr = np.trace(m)
        drift = abs(tr - 1.0)
        if not np.isfinite(drift) or drift > RENORM_DRIFT:
            raise RuntimeError(
                f"trace drift {drift:.3e} at t={times[i]:.3e}s exceeds {RENORM_DRIFT}; "
                f"reduce dt (currently {dt_eff:.3e}s)"
            )
        m = m / tr.real
        herm = np.max(np.abs(m - m.conj().T))
        if herm > 10 * HERM_TOL:
            raise RuntimeError(f"hermiticity violation {herm:.3e} at t={times[i]:.3e}s")
        m = 0.5 * (m + m.conj().T)
        rho = DensityMatrix(m, rho0.dims)
        for k, op in (observables or {}).items():
            obs_acc[k].append(expectation(rho, op))
        if keep_states and not observables:
            traj.states.append(rho)
        if i == samples.shape[0] - 1:
            traj.final = rho
    traj.observables = {k: np.array(v) for k, v in obs_acc.items()}

    lo = float(np.linalg.eigvalsh(traj.final.matrix)[0])
    if lo < NEGATIVITY_ABORT:
        raise RuntimeError(f"final-state negativity {lo:.3e}; reduce dt (currently {dt_eff:.3e}s)")
    return traj


def steady_state(H: sp.spmatrix, collapse_ops, method: str = "direct",
                 evolve_dt: float | None = None) -> DensityMatrix:
    """Stationary state of the generator, normalized to unit trace.

    ``direct`` replaces one row of the vectorized generator with the trace
    constraint and solves the sparse system (a null-space solve).  ``evolve``
    integrates until the generator residual drops below 1e-10 of scale.
    """
    ops = list(collapse_ops)
    if not any(op.power(2).sum() != 0 for op in ops):
        raise ValueError("need at least one dissipator with nonzero rate")
    d = H.shape[0]
    L = liouvillian(H, ops)

    # residuals are measured relative to the fastest rate in the generator
    scale = float(np.max(np.abs(L.data))) if L.nnz else 1.0

    if method == "evolve":
        rho = DensityMatrix(np.eye(d, dtype=complex) / d, (d,))
        dt = evolve_dt or 0.02 / scale
        chunk = 2000 * dt
        resid = np.inf
        for _ in range(500):
            rho = evolve(rho, H, ops, chunk, dt).final
            resid = float(np.max(np.abs(L @ rho.matrix.reshape(-1)))) / scale
            if resid < 1e-10:
                break
        else:
            raise RuntimeError(f"steady state not reached by evolution, residual {resid:.3e}")
        m = rho.matrix
    elif method == "direct":
        A = L.tolil()
        tr = np.zeros(d * d)
        tr[:: d + 1] = 1.0
        A[0] = tr
        b = np.zeros(d * d, dtype=complex)
        b[0] = 1.0
        x = spla.spsolve(A.tocsc(), b)
        resid = float(np.max(np.abs(L @ x))) / scale
        if not np.isfinite(resid) or resid > 1e-8:
            raise RuntimeError(f"direct steady-state solve residual {resid:.3e}")
        if d * d <= 400:
            sv = np.linalg.svd(L.toarray(), compute_uv=False)
            null_dim = int(np.sum(sv < 1e-10 * sv[0]))
            if null_dim > 1:
                log.warning("steady-state subspace is %d-fold degenerate; returning one solution",
                            null_dim)
        m = x.reshape(d, d)
    else:
        raise ValueError(f"unknown method {method!r}")

    m = m / np.trace(m).real
    m = 0.5 * (m + m.conj().T)
    # dims of the caller are unknown here; wrap as a flat system
    return DensityMatrix(m, (d,)).validate()


def expectation(rho: DensityMatrix, op) -> float:
    """Tr(rho O) for a Hermitian observable."""
    m = op.toarray() if sp.issparse(op) else np.asarray(op)
    if m.shape != rho.matrix.shape:
        raise ValueError("observable dimension mismatch")
    if np.max(np.abs(m - m.conj().T)) > 1e-9:
        raise ValueError("observable must be Hermitian")
    val = complex(np.trace(rho.matrix @ m))
    if abs(val.imag) > 1e-9:
        raise ValueError(f"expectation has imaginary residue {val.imag:.3e}")
    return val.real


def partial_trace(rho: DensityMatrix, keep: tuple[int, ...]) -> DensityMatrix:
    """Reduce to the subsystems in ``keep`` (indices into rho.dims)."""
    dims = rho.dims
    n = len(dims)
    keep = tuple(sorted(keep))
    letters = "abcdefghijkl"
    t = rho.matrix.reshape(dims + dims)
    sub_row = [letters[i] for i in range(n)]
    sub_col = [letters[n + i] if i in keep else letters[i] for i in range(n)]
    out_sub = [letters[i] for i in keep] + [letters[n + i] for i in keep]
    expr = "".join(sub_row + sub_col) + "->" + "".join(out_sub)
    red = np.einsum(expr, t)
    kept = tuple(dims[i] for i in keep)
    dk = int(np.prod(kept))
    return DensityMatrix(red.reshape(dk, dk), kept)
