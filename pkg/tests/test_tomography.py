import math

import numpy as np
import pytest

from warmlink.dynamics import DensityMatrix
from warmlink.tomography import (
    ConfusionMatrix, PAULI_ORDER, PAULIS, chi_from_outputs, fidelity_state,
    process_fidelity, spam_correct, state_tomography,
)

SQ = 1 / math.sqrt(2)
KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) * SQ,
    "+i": np.array([1, 1j], dtype=complex) * SQ,
}


def apply_kraus(kraus, rho):
    return sum(k @ rho @ k.conj().T for k in kraus)


def channel_outputs(kraus):
    return {key: DensityMatrix(apply_kraus(kraus, np.outer(v, v.conj())), (2,))
            for key, v in KETS.items()}


def chi_reference(kraus):
    """Independent chi construction straight from the Kraus operators."""
    omega = np.zeros(4, dtype=complex)
    omega[0] = omega[3] = 1.0
    choi = np.zeros((4, 4), dtype=complex)
    for k in kraus:
        v = np.kron(np.eye(2), k) @ omega
        choi += np.outer(v, v.conj())
    vmat = np.stack([np.kron(np.eye(2), PAULIS[p]) @ omega for p in PAULI_ORDER], axis=1)
    return 0.25 * vmat.conj().T @ choi @ vmat


class TestChi:
    def test_identity_channel(self):
        chi = chi_from_outputs(channel_outputs([np.eye(2)]))
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        assert np.max(np.abs(chi.matrix - expected)) < 1e-12
        assert process_fidelity(chi) == pytest.approx(1.0)

    @pytest.mark.parametrize("name", ["X", "Y", "Z"])
    def test_pauli_channels(self, name):
        u = PAULIS[name]
        chi = chi_from_outputs(channel_outputs([u]))
        idx = PAULI_ORDER.index(name)
        assert chi.matrix[idx, idx].real == pytest.approx(1.0, abs=1e-12)
        # unitary rule: F = |Tr(U)/2|^2
        assert process_fidelity(chi) == pytest.approx(abs(np.trace(u)) ** 2 / 4,
                                                      abs=1e-9)

    def test_unitary_rule_identity(self):
        chi = chi_from_outputs(channel_outputs([np.eye(2)]))
        assert process_fidelity(chi) == pytest.approx(1.0, abs=1e-9)

    def test_amplitude_damping_round_trip(self):
        gamma = 0.37
        kraus = [np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
                 np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)]
        chi = chi_from_outputs(channel_outputs(kraus))
        assert np.max(np.abs(chi.matrix - chi_reference(kraus))) < 1e-8

    def test_depolarizing_channel(self):
        outputs = {key: DensityMatrix(np.eye(2, dtype=complex) / 2, (2,))
                   for key in KETS}
        chi = chi_from_outputs(outputs)
        assert np.max(np.abs(chi.matrix - np.eye(4) / 4)) < 1e-12
        assert process_fidelity(chi) == pytest.approx(0.25)

    def test_missing_input_rejected(self):
        outs = channel_outputs([np.eye(2)])
        outs.pop("+i")
        with pytest.raises(ValueError):
            chi_from_outputs(outs)


class TestSpam:
    def test_identity_round_trip_exact(self):
        p = np.array([0.7, 0.3])
        q = spam_correct(p, ConfusionMatrix.identity())
        assert np.array_equal(q, p)

    def test_symmetric_error_round_trip(self):
        conf = ConfusionMatrix.symmetric(0.04)
        p = np.array([0.81, 0.19])
        distorted = conf.matrix.T @ p
        q = spam_correct(distorted, conf)
        assert np.max(np.abs(q - p)) < 1e-12

    def test_two_qubit_round_trip(self):
        conf = [ConfusionMatrix.symmetric(0.04), ConfusionMatrix.symmetric(0.02)]
        p = np.array([0.5, 0.2, 0.2, 0.1])
        m = np.kron(conf[0].matrix, conf[1].matrix).T
        q = spam_correct(m @ p, conf)
        assert np.max(np.abs(q - p)) < 1e-12

    def test_hand_checked_inversion(self):
        conf = ConfusionMatrix.symmetric(0.04)
        q = spam_correct(np.array([0.9, 0.1]), conf)
        assert q[0] == pytest.approx(0.86 / 0.92, abs=1e-9)
        assert q[1] == pytest.approx(0.06 / 0.92, abs=1e-9)

    def test_singular_rejected(self):
        conf = ConfusionMatrix(np.array([[0.5, 0.5], [0.5, 0.5]]))
        with pytest.raises(ValueError):
            spam_correct(np.array([0.6, 0.4]), conf)

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            spam_correct(np.array([0.6, 0.6]), ConfusionMatrix.identity())

    def test_row_stochastic_enforced(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(np.array([[0.9, 0.2], [0.1, 0.9]]))


class TestStateTomography:
    def test_pure_bell_reconstruction(self):
        psi = np.zeros(4, dtype=complex)
        psi[1] = psi[2] = SQ
        rho = DensityMatrix(np.outer(psi, psi.conj()), (2, 2))
        tomo = state_tomography(rho, target=psi)
        assert tomo.fidelity == pytest.approx(1.0, abs=1e-10)
        assert np.max(np.abs(tomo.state.matrix - rho.matrix)) < 1e-10

    def test_identity_confusion_matches_uncorrected(self):
        rng = np.random.default_rng(3)
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = m @ m.conj().T
        rho = DensityMatrix(rho / np.trace(rho), (2, 2))
        raw = state_tomography(rho, confusion=ConfusionMatrix.identity(), correct=False)
        cor = state_tomography(rho, confusion=ConfusionMatrix.identity(), correct=True)
        assert np.max(np.abs(raw.state.matrix - cor.state.matrix)) < 1e-14

    def test_single_qubit_round_trip(self):
        rho = DensityMatrix(np.array([[0.7, 0.2 + 0.1j], [0.2 - 0.1j, 0.3]],
                                     dtype=complex), (2,))
        tomo = state_tomography(rho)
        assert np.max(np.abs(tomo.state.matrix - rho.matrix)) < 1e-10

    def test_confusion_distorts_raw_data(self):
        psi = np.zeros(4, dtype=complex)
        psi[1] = psi[2] = SQ
        rho = DensityMatrix(np.outer(psi, psi.conj()), (2, 2))
        conf = ConfusionMatrix.symmetric(0.04)
        raw = state_tomography(rho, confusion=conf, correct=False, target=psi)
        cor = state_tomography(rho, confusion=conf, correct=True, target=psi)
        assert raw.fidelity < 0.95
        assert cor.fidelity == pytest.approx(1.0, abs=1e-9)


class TestFidelity:
    def test_pure_state_on_itself(self):
        psi = np.array([SQ, 0, 0, SQ], dtype=complex)
        rho = DensityMatrix(np.outer(psi, psi.conj()), (2, 2))
        assert fidelity_state(rho, psi) == pytest.approx(1.0)

    def test_maximally_mixed(self):
        psi = np.zeros(4, dtype=complex)
        psi[1] = psi[2] = SQ
        rho = DensityMatrix(np.eye(4, dtype=complex) / 4, (2, 2))
        assert fidelity_state(rho, psi) == pytest.approx(0.25)

    def test_regression_fixture_085(self):
        # 80% target + 20% fully mixed lands at 0.85, the reference point used
        # for the warmest-channel raw entanglement fidelity
        psi = np.zeros(4, dtype=complex)
        psi[1] = psi[2] = SQ
        rho = 0.8 * np.outer(psi, psi.conj()) + 0.2 * np.eye(4) / 4
        assert fidelity_state(DensityMatrix(rho, (2, 2)), psi) == pytest.approx(0.85)

    def test_unnormalized_target_rejected(self):
        rho = DensityMatrix(np.eye(2, dtype=complex) / 2, (2,))
        with pytest.raises(ValueError):
            fidelity_state(rho, np.array([1.0, 1.0]))
