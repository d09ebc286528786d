"""State and process tomography on simulated measurement probabilities.

Reconstruction is plain linear inversion from Pauli expectations of the
computational-subspace state.  Readout imperfections are emulated by pushing
outcome probabilities through per-qubit confusion matrices; SPAM correction
inverts the same matrices.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .dynamics import DensityMatrix

__all__ = [
    "PAULIS", "ProcessMatrix", "ConfusionMatrix", "StateTomogram",
    "state_tomography", "process_tomography", "chi_from_outputs",
    "spam_correct", "fidelity_state", "process_fidelity", "measurement_settings",
]

log = logging.getLogger(__name__)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}
PAULI_ORDER = ("I", "X", "Y", "Z")

# rotations mapping each measurement axis onto Z before a computational readout
_SQ = 1.0 / math.sqrt(2.0)
_MEAS_ROT = {
    "Z": I2,
    "X": np.array([[_SQ, _SQ], [_SQ, -_SQ]], dtype=complex),        # Hadamard
    "Y": np.array([[_SQ, -1j * _SQ], [_SQ, 1j * _SQ]], dtype=complex),
}


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row-stochastic readout map: entry [i, j] = P(read j | prepared i)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.shape != (2, 2):
            raise ValueError("per-qubit confusion matrix must be 2x2")
        if np.any(m < 0) or np.any(m > 1):
            raise ValueError("confusion entries must lie in [0, 1]")
        if np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("confusion rows must sum to one")

    @classmethod
    def identity(cls) -> "ConfusionMatrix":
        return cls(np.eye(2))

    @classmethod
    def symmetric(cls, error: float) -> "ConfusionMatrix":
        return cls(np.array([[1 - error, error], [error, 1 - error]]))


@dataclass
class StateTomogram:
    """Reconstructed computational-subspace state with bookkeeping."""

    state: DensityMatrix
    fidelity: float | None = None
    leakage: float = 0.0
    clipped: float = 0.0


@dataclass
class ProcessMatrix:
    """Single-qubit chi matrix in the (I, X, Y, Z) operator basis."""

    matrix: np.ndarray
    basis: tuple[str, ...] = PAULI_ORDER

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("chi must be 4x4")
        if np.max(np.abs(m - m.conj().T)) > 1e-9:
            raise ValueError("chi must be Hermitian")
        tp = sum(m[a, b] * (PAULIS[self.basis[b]].conj().T @ PAULIS[self.basis[a]])
                 for a in range(4) for b in range(4))
        if np.max(np.abs(tp - I2)) > 1e-6:
            raise ValueError("chi violates trace preservation")
        self.matrix = m


def _tensor(mats) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def measurement_settings(n_qubits: int):
    return list(product("XYZ", repeat=n_qubits))


def _confusion_tensor(confusion) -> np.ndarray:
    out = np.array([[1.0]])
    for c in confusion:
        out = np.kron(out, c.matrix)
    return out


def _distort(p: np.ndarray, confusion) -> np.ndarray:
    return _confusion_tensor(confusion).T @ p


def spam_correct(probabilities, confusion) -> np.ndarray:
    """Invert the (tensored) confusion map on an outcome distribution.

    Small negative entries from the inversion are clipped; the vector is
    renormalized.  A singular confusion matrix is rejected.
    """
    p = np.asarray(probabilities, dtype=float)
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to one")
    confusion = [confusion] if isinstance(confusion, ConfusionMatrix) else list(confusion)
    m = _confusion_tensor(confusion).T
    if abs(np.linalg.det(m)) < 1e-12:
        raise ValueError("confusion matrix is singular")
    q = np.linalg.solve(m, p)
    if q.min() < -1e-6:
        log.warning("SPAM inversion produced probability %.3e < -1e-6", q.min())
    q = np.clip(q, 0.0, None)
    return q / q.sum()


def _setting_probabilities(rho: np.ndarray, setting) -> np.ndarray:
    """Computational-basis outcome distribution after the pre-rotations."""
    u = _tensor([_MEAS_ROT[ax] for ax in setting])
    return np.real(np.diag(u @ rho @ u.conj().T))


def _expectations_from_probs(probs_by_setting, n_qubits: int) -> dict[str, float]:
    """All Pauli-string expectations from the 3^n measured settings."""
    out = {"I" * n_qubits: 1.0}
    for label in product(PAULI_ORDER, repeat=n_qubits):
        name = "".join(label)
        if name == "I" * n_qubits:
            continue
        setting = tuple(ax if ax != "I" else "Z" for ax in label)
        p = probs_by_setting[setting]
        val = 0.0
        for idx, prob in enumerate(p):
            bits = [(idx >> (n_qubits - 1 - k)) & 1 for k in range(n_qubits)]
            sign = 1.0
            for k, ax in enumerate(label):
                if ax != "I" and bits[k] == 1:
                    sign = -sign
            val += sign * prob
        out[name] = val
    return out


def state_tomography(rho: DensityMatrix, confusion=None, correct: bool = True,
                     target: np.ndarray | None = None,
                     leakage: float = 0.0) -> StateTomogram:
    """Linear-inversion reconstruction of a 1- or 2-qubit subspace state.

    ``confusion`` distorts the simulated outcome probabilities (raw-data
    emulation); with ``correct`` the inverse map is applied again before
    inversion, mimicking SPAM calibration.
    """
    n = len(rho.dims)
    if rho.matrix.shape[0] != 2 ** n:
        raise ValueError("state_tomography expects a qubit-subspace state")
    if confusion is None:
        conf = [ConfusionMatrix.identity()] * n
    elif isinstance(confusion, ConfusionMatrix):
        conf = [confusion] * n
    else:
        conf = list(confusion)

    probs = {}
    for setting in measurement_settings(n):
        p = _setting_probabilities(rho.matrix, setting)
        p = _distort(p, conf)
        if correct:
            p = spam_correct(p, conf)
        probs[setting] = p

    exps = _expectations_from_probs(probs, n)
    dim = 2 ** n
    rec = np.zeros((dim, dim), dtype=complex)
    for label, val in exps.items():
        rec += val * _tensor([PAULIS[ax] for ax in label])
    rec /= dim

    vals, vecs = np.linalg.eigh(rec)
    clipped = float(-vals.min()) if vals.min() < 0 else 0.0
    if vals.min() < -1e-6:
        log.warning("reconstruction clipped negative eigenvalue %.3e", vals.min())
    vals = np.clip(vals, 0.0, None)
    rec = (vecs * vals) @ vecs.conj().T
    rec /= np.trace(rec).real

    tomo = StateTomogram(state=DensityMatrix(rec, rho.dims), leakage=leakage,
                         clipped=clipped)
    if target is not None:
        tomo.fidelity = fidelity_state(tomo.state, target)
    return tomo


def fidelity_state(rho: DensityMatrix, target_pure_state: np.ndarray) -> float:
    """<psi|rho|psi> with imaginary-residue and normalization checks."""
    psi = np.asarray(target_pure_state, dtype=complex).reshape(-1)
    if abs(np.vdot(psi, psi) - 1.0) > 1e-9:
        raise ValueError("target state must be normalized")
    if psi.shape[0] != rho.matrix.shape[0]:
        raise ValueError("dimension mismatch")
    val = complex(np.vdot(psi, rho.matrix @ psi))
    if abs(val.imag) > 1e-9:
        raise ValueError(f"fidelity has imaginary residue {val.imag:.3e}")
    return float(val.real)


_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "+i": np.array([1, 1j], dtype=complex) / math.sqrt(2),
}


def chi_from_outputs(outputs: dict[str, DensityMatrix]) -> ProcessMatrix:
    """Assemble chi from the channel images of |0>, |1>, |+>, |+i>.

    The images fix the action on the matrix units, giving the Choi operator;
    projecting it on the Pauli frame yields chi with trace preservation built
    in when the outputs have unit trace.
    """
    for key in ("0", "1", "+", "+i"):
        if key not in outputs:
            raise ValueError(f"missing channel output for input {key!r}")
    e = {k: (v.matrix if isinstance(v, DensityMatrix) else np.asarray(v, dtype=complex))
         for k, v in outputs.items()}
    e00, e11 = e["0"], e["1"]
    e01 = e["+"] + 1j * e["+i"] - 0.5 * (1 + 1j) * (e00 + e11)
    e10 = e["+"] - 1j * e["+i"] - 0.5 * (1 - 1j) * (e00 + e11)

    choi = np.zeros((4, 4), dtype=complex)
    units = {(0, 0): e00, (0, 1): e01, (1, 0): e10, (1, 1): e11}
    for (k, l), img in units.items():
        unit = np.zeros((2, 2), dtype=complex)
        unit[k, l] = 1.0
        choi += np.kron(unit, img)

    omega = np.zeros(4, dtype=complex)
    omega[0] = omega[3] = 1.0  # unnormalized maximally entangled pair
    v = np.stack([np.kron(I2, PAULIS[p]) @ omega for p in PAULI_ORDER], axis=1)
    chi = 0.25 * v.conj().T @ choi @ v
    chi = 0.5 * (chi + chi.conj().T)
    return ProcessMatrix(chi)


def process_fidelity(chi: ProcessMatrix, ideal: np.ndarray | None = None) -> float:
    """Tr(chi . chi_ideal); the ideal process defaults to the identity."""
    if ideal is None:
        ideal = np.zeros((4, 4), dtype=complex)
        ideal[0, 0] = 1.0
    val = complex(np.trace(chi.matrix @ ideal))
    return float(val.real)


def process_tomography(run_transfer, confusion=None, correct: bool = True) -> tuple[ProcessMatrix, float]:
    """Process matrix of a transfer channel probed with the four standard inputs.

    ``run_transfer(prep)`` must run the protocol with the given sender
    preparation and return the receiver's single-qubit subspace state.
    """
    preps = {
        "0": (),
        "1": (("pi", 0),),
        "+": (("pi_half_y", 0),),
        "+i": (("pi_half_x", 0),),
    }
    outputs = {}
    for key, prep in preps.items():
        out = run_transfer(prep)
        tomo = state_tomography(out, confusion=confusion, correct=correct)
        outputs[key] = tomo.state
    chi = chi_from_outputs(outputs)
    return chi, process_fidelity(chi)
