# tests/test_tomography.py

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backend.errors import NumericalError, ValidationError
from data.random_streams import stream
from tomography.pauli import (
    choi_min_eigenvalue,
    choi_to_ptm,
    is_trace_preserving,
    pauli_basis,
    pauli_labels,
    pauli_vector,
    ptm_average_fidelity,
    ptm_from_kraus,
    ptm_from_unitary,
    ptm_to_choi,
    state_from_pauli_vector,
)
from tomography.qpt import PREP_STATES, process_counts, project_cptp, project_tp, qpt_ptm
from tomography.qst import (
    bell_fidelity,
    bootstrap_bell_fidelity,
    density_matrix_to_json,
    linear_inversion_state,
    project_to_density_matrix,
    qst_mle,
    state_counts,
)
from tomography.spam import spam_corrupt, spam_strip

X = np.array([[0, 1], [1, 0]], dtype=complex)
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
CONFUSION = [[0.951, 0.125], [0.049, 0.875]]


def dm(v):
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def werner(p):
    return p * dm(PHI_PLUS) + (1 - p) * np.eye(4) / 4


def depolarizing_ptm(lam):
    return np.diag([1.0, 1 - lam, 1 - lam, 1 - lam])


def amplitude_damping(gamma):
    return [np.array([[1, 0], [0, np.sqrt(1 - gamma)]]), np.array([[0, np.sqrt(gamma)], [0, 0]])]


def random_kraus(seed, d=2, rank=2):
    rng = stream(seed, "random-channel")
    G = rng.normal(size=(rank * d, d)) + 1j * rng.normal(size=(rank * d, d))
    Q, _ = np.linalg.qr(G)
    return [Q[k * d:(k + 1) * d] for k in range(rank)]


class TestPauli:
    def test_basis_orthogonality(self):
        P = pauli_basis(2)
        assert P.shape == (16, 4, 4)
        gram = np.einsum("aij,bji->ab", P, P)
        assert np.allclose(gram, 4 * np.eye(16))
        assert pauli_labels(2)[4 * 1 + 3] == "XZ"

    def test_state_round_trip(self):
        rho = werner(0.7)
        assert np.allclose(state_from_pauli_vector(pauli_vector(rho)), rho)

    def test_unitary_ptms(self):
        assert np.allclose(ptm_from_unitary(X), np.diag([1, 1, -1, -1]))
        assert np.allclose(ptm_from_unitary(np.eye(2)), np.eye(4))

    def test_depolarizing_from_kraus(self):
        lam = 0.2
        kraus = [np.sqrt(1 - 3 * lam / 4) * np.eye(2)] + [np.sqrt(lam / 4) * P for P in pauli_basis(1)[1:]]
        assert np.allclose(ptm_from_kraus(kraus), depolarizing_ptm(lam))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_choi_round_trip(self, seed):
        R = ptm_from_kraus(random_kraus(seed))
        J = ptm_to_choi(R)
        assert np.trace(J).real == pytest.approx(2.0)
        assert choi_min_eigenvalue(J) > -1e-10
        assert np.allclose(choi_to_ptm(J), R, atol=1e-10)
        assert is_trace_preserving(R)

    def test_average_fidelity(self):
        assert ptm_average_fidelity(np.eye(4), np.eye(4)) == pytest.approx(1.0)
        assert ptm_average_fidelity(depolarizing_ptm(0.3), np.eye(4)) == pytest.approx(1 - 0.3 / 2)
        assert ptm_average_fidelity(ptm_from_unitary(X), np.eye(4)) == pytest.approx(1 / 3)

    def test_non_power_of_two(self):
        with pytest.raises(ValidationError):
            pauli_vector(np.eye(3))


class TestStateTomography:
    def test_linear_inversion_exact(self):
        rho = werner(0.8)
        est = linear_inversion_state(state_counts(rho, 1000, exact=True), 2)
        assert np.allclose(est, rho, atol=1e-9)

    @pytest.mark.parametrize("ket", [np.array([1, 0]), np.array([1, 1j]) / np.sqrt(2)])
    def test_mle_pure_single_qubit(self, ket):
        rho = dm(ket)
        est = qst_mle(state_counts(rho, 1000, exact=True), 1)
        assert est.converged
        assert np.real(np.trace(rho @ est.rho)) == pytest.approx(1.0, abs=1e-6)

    def test_mle_bell_state(self):
        est = qst_mle(state_counts(dm(PHI_PLUS), 1000, exact=True), 2)
        F, phi = bell_fidelity(est.rho)
        assert F == pytest.approx(1.0, abs=1e-6)
        assert phi == pytest.approx(0.0, abs=1e-4)

    def test_mle_mixed_state(self):
        est = qst_mle(state_counts(werner(0.8), 1000, exact=True), 2)
        assert bell_fidelity(est.rho)[0] == pytest.approx(0.85, abs=1e-3)
        assert np.linalg.eigvalsh(est.rho).min() > -1e-12
        assert np.trace(est.rho).real == pytest.approx(1.0)

    def test_mle_finite_shots(self):
        rho = werner(0.9)
        est = qst_mle(state_counts(rho, 20000, seed=11), 2)
        w = np.linalg.eigvalsh(est.rho - rho)
        assert 0.5 * np.abs(w).sum() < 0.05

    @pytest.mark.parametrize("estimate, p", [
        (lambda counts: linear_inversion_state(counts, 2), 0.8),
        (lambda counts: qst_mle(counts, 2).rho, 0.6),
    ], ids=["linear", "mle"])
    def test_fidelity_error_shrinks_with_shots(self, estimate, p):
        rho = werner(p)
        F_true = bell_fidelity(rho)[0]
        scaled = []
        for shots in (500, 2000, 8000):
            errors = [bell_fidelity(estimate(state_counts(rho, shots, seed=seed)))[0] - F_true for seed in range(24)]
            scaled.append(np.sqrt(np.mean(np.square(errors)) * shots))
        assert max(scaled) / min(scaled) < 2.0

    def test_missing_basis_is_rank_deficient(self):
        counts = state_counts(dm([1, 0]), 100, exact=True, bases=["Z"])
        with pytest.raises(NumericalError):
            linear_inversion_state(counts, 1)
        with pytest.raises(NumericalError):
            qst_mle(counts, 1)

    def test_negative_counts_rejected(self):
        counts = state_counts(dm([1, 0]), 100, exact=True)
        counts.loc[0, "count"] = -1
        with pytest.raises(ValidationError):
            qst_mle(counts, 1)

    def test_projection_onto_density_matrices(self):
        out = project_to_density_matrix(np.diag([1.2, -0.2]))
        assert np.allclose(out, np.diag([1.0, 0.0]))
        rho = werner(0.5)
        assert np.allclose(project_to_density_matrix(rho), rho)

    def test_density_matrix_json(self):
        out = density_matrix_to_json(dm(np.array([1, 1j]) / np.sqrt(2)))
        assert out[0][1] == [0.0, -0.5]


class TestBellFidelity:
    def test_bell_states(self):
        assert bell_fidelity(dm(PHI_PLUS)) == (pytest.approx(1.0), pytest.approx(0.0))
        F, phi = bell_fidelity(dm(PSI_MINUS))
        assert F == pytest.approx(1.0)
        assert phi == pytest.approx(np.pi)

    def test_phase_is_recovered(self):
        F, phi = bell_fidelity(dm(np.array([1, 0, 0, 1j]) / np.sqrt(2)))
        assert F == pytest.approx(1.0)
        assert phi == pytest.approx(np.pi / 2)

    def test_product_state(self):
        assert bell_fidelity(dm([1, 0, 0, 0]))[0] == pytest.approx(0.5)

    def test_werner(self):
        assert bell_fidelity(werner(0.6))[0] == pytest.approx(0.6 + 0.4 / 4)

    def test_wrong_shape(self):
        with pytest.raises(ValidationError):
            bell_fidelity(np.eye(2) / 2)

    def test_bootstrap_sigma(self):
        counts = state_counts(werner(0.9), 500, seed=2)
        sigma = bootstrap_bell_fidelity(counts, resamples=200, seed=3, estimator="linear")
        assert 0.0 < sigma < 0.05


class TestProcessTomography:
    def test_prep_states_are_informationally_complete(self):
        vecs = np.array([pauli_vector(dm(v)) for v in PREP_STATES.values()])
        assert np.linalg.matrix_rank(vecs) == 4

    @pytest.mark.parametrize("R", [
        ptm_from_unitary(X),
        depolarizing_ptm(0.2),
        ptm_from_kraus(amplitude_damping(0.3)),
    ])
    def test_exact_counts_recover_ptm(self, R):
        est = qpt_ptm(process_counts(R, 1000, exact=True))
        assert np.allclose(est.ptm, R, atol=1e-6)
        assert est.residual_ls < 1e-9
        assert est.choi_min_eigenvalue > -1e-9

    def test_finite_shots_give_cptp_estimate(self):
        est = qpt_ptm(process_counts(depolarizing_ptm(0.1), 2000, seed=5))
        assert is_trace_preserving(est.ptm)
        assert est.choi_min_eigenvalue > -1e-9
        assert np.max(np.abs(est.ptm - depolarizing_ptm(0.1))) < 0.1

    def test_rank_deficient_design(self):
        counts = process_counts(np.eye(4), 100, exact=True, preps=["0", "1"])
        with pytest.raises(NumericalError, match=r"R\["):
            qpt_ptm(counts)

    def test_prep_column_required(self):
        counts = process_counts(np.eye(4), 100, exact=True).drop(columns="prep")
        with pytest.raises(ValidationError):
            qpt_ptm(counts)

    def test_projection_is_cptp_and_closest(self):
        R = np.diag([1.0, 1.1, 1.0, 0.9])
        J = ptm_to_choi(R)
        P, _ = project_cptp(J)
        assert choi_min_eigenvalue(P) > -1e-10
        assert np.allclose(project_tp(P, 2), P, atol=1e-10)
        dist = np.linalg.norm(P - J)
        for seed in range(20):
            candidate = ptm_to_choi(ptm_from_kraus(random_kraus(seed)))
            assert dist <= np.linalg.norm(candidate - J) + 1e-9


class TestSpam:
    def test_strip_undoes_corruption(self):
        counts = process_counts(depolarizing_ptm(0.1), 1000, exact=True)
        stripped = spam_strip(spam_corrupt(counts, CONFUSION), CONFUSION)
        assert np.allclose(stripped["count"].to_numpy(), counts["count"].to_numpy(), atol=1e-9)
        assert not stripped["clamped"].any()

    def test_strip_raises_process_fidelity(self):
        counts = spam_corrupt(process_counts(np.eye(4), 1000, exact=True), CONFUSION)
        raw = ptm_average_fidelity(qpt_ptm(counts).ptm, np.eye(4))
        stripped = ptm_average_fidelity(qpt_ptm(spam_strip(counts, CONFUSION)).ptm, np.eye(4))
        assert stripped > raw
        assert stripped == pytest.approx(1.0, abs=1e-6)

    def test_two_qubit_state_counts(self):
        counts = state_counts(dm(PHI_PLUS), 1000, exact=True)
        stripped = spam_strip(spam_corrupt(counts, CONFUSION), CONFUSION)
        assert np.allclose(stripped["count"].to_numpy(), counts["count"].to_numpy(), atol=1e-9)
