# tests/test_readout.py

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backend.config import CONFUSION_MATRIX, PARITY_ERROR, SEQUENCE_KEEP
from backend.errors import NumericalError, ValidationError
from data.random_streams import stream
from readout.confusion import (
    ConfusionMatrix,
    apply_confusion,
    correct_readout,
    get_confusion_matrix,
    parity_readout_fidelity,
)
from readout.initialization import (
    InitializationKnobs,
    expected_kept_shots,
    initialize_sequence,
    keep_fraction_expected,
    sample_initialization,
)
from readout.parity import (
    ParityChannel,
    flip_outcomes,
    idle_dephasing,
    parity_kraus,
    parity_measure,
    sample_parity_outcomes,
    shot_records,
)
from tomography.pauli import choi_min_eigenvalue, is_trace_preserving, ptm_from_kraus, ptm_to_choi

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)


def ket(bits):
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


class TestConfusion:
    def test_fixture_matches_config(self):
        assert np.allclose(get_confusion_matrix().matrix, CONFUSION_MATRIX)

    def test_apply_to_uniform(self):
        assert np.allclose(apply_confusion([0.5, 0.5]), [0.538, 0.462], atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.0, 1.0))
    def test_correction_inverts_apply(self, p0):
        p = np.array([p0, 1.0 - p0])
        out = correct_readout(apply_confusion(p))
        assert not out["clamped"]
        assert np.allclose(out["probabilities"], p, atol=1e-12)

    def test_correction_clamps_outside_simplex(self):
        out = correct_readout([1.0, 0.0])
        assert out["clamped"]
        assert np.allclose(out["probabilities"], [1.0, 0.0])

    def test_singular_matrix(self):
        with pytest.raises(NumericalError):
            correct_readout([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]])

    def test_columns_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            ConfusionMatrix([[0.9, 0.2], [0.2, 0.8]])

    def test_tensor_product_is_stochastic(self):
        M2 = get_confusion_matrix().tensor(2)
        assert M2.dim == 4
        assert np.allclose(M2.matrix.sum(axis=0), 1.0)
        assert M2.matrix[0, 0] == pytest.approx(0.951 ** 2)

    def test_parity_readout_fidelity(self):
        assert parity_readout_fidelity(0.9799, 0.9912) == pytest.approx(0.98555)


class TestParityChannel:
    def test_parallel_spins_read_even(self):
        ch = ParityChannel()
        assert ch.probabilities(np.outer(PHI_PLUS, PHI_PLUS.conj()))["even"] == pytest.approx(1.0)
        assert ch.probabilities(np.outer(ket("01"), ket("01")))["odd"] == pytest.approx(1.0)

    def test_odd_outcome_dephases(self):
        rho = np.outer(PSI_PLUS, PSI_PLUS.conj())
        dephased = ParityChannel(dephase_odd=True).branch(rho, "odd")
        coherent = ParityChannel(dephase_odd=False).branch(rho, "odd")
        assert abs(dephased[1, 2]) < 1e-12
        assert abs(coherent[1, 2]) == pytest.approx(0.5)

    def test_even_branch_keeps_bell_coherence(self):
        rho = np.outer(PHI_PLUS, PHI_PLUS.conj())
        assert np.allclose(ParityChannel().branch(rho, "even"), rho)

    def test_channel_is_trace_preserving(self):
        rng = stream(3, "test-parity")
        A = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        rho = A @ A.conj().T
        rho /= np.trace(rho)
        out = ParityChannel((0, 2), 3).apply(rho)
        assert np.trace(out).real == pytest.approx(1.0)

    @pytest.mark.parametrize("pair, n_qubits", [((0, 1), 2), ((0, 2), 3)])
    @pytest.mark.parametrize("dephase_odd", [True, False])
    def test_channel_is_completely_positive(self, pair, n_qubits, dephase_odd):
        R = ptm_from_kraus(parity_kraus(pair, n_qubits, dephase_odd))
        assert choi_min_eigenvalue(ptm_to_choi(R)) >= -1e-12
        assert is_trace_preserving(R)

    def test_pair_in_larger_register(self):
        ch = ParityChannel((2, 3), 4)
        assert ch.probabilities(np.outer(ket("1001"), ket("1001")))["odd"] == pytest.approx(1.0)
        assert ch.probabilities(np.outer(ket("1011"), ket("1011")))["even"] == pytest.approx(1.0)

    def test_rejects_bad_pair(self):
        with pytest.raises(ValidationError):
            ParityChannel((1, 1), 2)
        with pytest.raises(ValidationError):
            ParityChannel((0, 4), 4)

    def test_measure_returns_normalized_state(self):
        psi = (ket("00") + ket("01")) / np.sqrt(2)
        outcome, post = parity_measure(psi, ParityChannel(), seed=5)
        assert outcome in ("even", "odd")
        assert np.trace(post).real == pytest.approx(1.0)
        expected = "00" if outcome == "even" else "01"
        assert post[int(expected, 2), int(expected, 2)].real == pytest.approx(1.0)

    def test_repeated_measurement_is_projective(self):
        psi = (ket("00") + ket("01") + ket("10") + 1j * ket("11")) / 2
        outcomes = set()
        for seed in range(200):
            first, post = parity_measure(psi, ParityChannel(), seed=seed)
            second, again = parity_measure(post, ParityChannel(), seed=seed + 1000)
            assert second == first
            assert np.allclose(again, post, atol=1e-12)
            outcomes.add(first)
        assert outcomes == {"even", "odd"}

    def test_measure_rejects_wrong_dimension(self):
        with pytest.raises(ValidationError):
            parity_measure(ket("000"), ParityChannel(), seed=0)

    def test_idle_dephasing_removes_coherence(self):
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        rho = np.outer(plus, plus.conj())
        assert abs(idle_dephasing(rho, [0], 0.5, 1)[0, 1]) < 1e-12
        assert abs(idle_dephasing(rho, [0], 0.1, 1)[0, 1]) == pytest.approx(0.4)
        with pytest.raises(ValidationError):
            idle_dephasing(rho, [0], 1.5, 1)


class TestParityShots:
    def test_flip_all(self):
        out = flip_outcomes(np.array(["even", "odd"]), 1.0, stream(0, "flip"))
        assert out.tolist() == ["odd", "even"]

    def test_noiseless_outcomes(self):
        out = sample_parity_outcomes(1.0, 500, seed=1, parity_error=0.0)
        assert (out == "even").all()

    def test_flip_rate(self):
        out = sample_parity_outcomes(1.0, 20000, seed=2, parity_error=PARITY_ERROR)
        rate = np.mean(out == "odd")
        sigma = np.sqrt(PARITY_ERROR * (1 - PARITY_ERROR) / 20000)
        assert abs(rate - PARITY_ERROR) < 4 * sigma

    def test_negative_shots(self):
        with pytest.raises(ValidationError):
            sample_parity_outcomes(0.5, -1)

    def test_shot_records_table(self):
        df = shot_records(PHI_PLUS, ParityChannel(label="Q5Q6"), 300, seed=4, parity_error=0.0, keep_fraction=1.0)
        assert list(df.columns) == ["shot_id", "pair", "outcome", "kept"]
        assert (df["pair"] == "Q5Q6").all()
        assert (df["outcome"] == "even").all()
        assert df["kept"].all()

    def test_shot_records_reproducible(self):
        a = shot_records(PSI_PLUS, ParityChannel(), 200, seed=9)
        b = shot_records(PSI_PLUS, ParityChannel(), 200, seed=9)
        assert a.equals(b)


class TestInitialization:
    def test_noiseless_initialization(self):
        for shot in range(20):
            out = initialize_sequence(seed=0, shot=shot)
            assert out.kept
            assert abs(out.state[int("1000", 2)]) == pytest.approx(1.0)
            assert out.attempts in (0, 1, 2)

    def test_attempts_count_feedback_pulses(self):
        always_even = InitializationKnobs(p_even_initial=1.0)
        out = initialize_sequence(seed=1, knobs=always_even)
        assert out.attempts == 2
        assert out.kept

    def test_keep_fraction_statistics(self):
        eps = 0.1
        shots = 4000
        df = sample_initialization(shots, seed=7, knobs=InitializationKnobs(parity_error=eps))
        p = keep_fraction_expected(eps)
        assert p == pytest.approx((0.9 ** 2 + 0.1 ** 2) ** 2)
        sigma = np.sqrt(p * (1 - p) / shots)
        assert abs(df["kept"].mean() - p) < 4 * sigma

    def test_double_misreport_keeps_a_wrong_pair(self):
        df = sample_initialization(2000, seed=8, knobs=InitializationKnobs(parity_error=0.2))
        wrong = 1.0 - df.loc[df["kept"], "correct"].mean()
        assert 0.0 < wrong < 0.2

    def test_adiabatic_error_spoils_kept_shots(self):
        df = sample_initialization(500, seed=8, knobs=InitializationKnobs(adiabatic_error=1.0))
        assert df["kept"].all()
        assert not df["correct"].any()

    def test_expected_kept_shots(self):
        n = expected_kept_shots(800)
        assert n == pytest.approx(800 * ((1 - PARITY_ERROR) ** 2 + PARITY_ERROR ** 2) ** 2 * SEQUENCE_KEEP)
        assert 125 < n < 375

    def test_knobs_are_probabilities(self):
        with pytest.raises(ValidationError):
            InitializationKnobs(parity_error=1.2)
