# tests/test_benchmarking.py

import numpy as np
import pandas as pd
import pytest

from backend.errors import ValidationError
from benchmarking.bootstrap import bootstrap, bootstrap_fit
from benchmarking.clifford import (
    CZ,
    class_sizes,
    get_clifford_group,
    is_symplectic,
    native_gate_counts,
    single_qubit_clifford_group,
    two_qubit_clifford_group,
    two_qubit_clifford_sampler,
    x90_counts,
)
from benchmarking.fitting import (
    clifford_fidelity,
    composed_clifford_fidelity,
    fit_gaussian_decay,
    fit_rb,
    gaussian_decay,
    interleaved_cz_fidelity,
    joint_fidelity,
    rb_curve,
)
from benchmarking.rb import (
    Composite,
    Depolarizing,
    IdealChannel,
    UnitaryError,
    cz_error_channel,
    rb_drift_series,
    rb_run,
    simultaneous_rb,
)
from data.random_streams import stream
from dynamics.evolution import cz_with_phase_error, evolve, local_phase_corrected_cz
from dynamics.fidelity import average_gate_fidelity
from dynamics.schedule import cz_schedule

SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)


@pytest.fixture(scope="module")
def group2():
    return two_qubit_clifford_group()


def synthetic_decay(A, p, B, lengths, stderr=0.01):
    L = np.asarray(lengths, dtype=float)
    return pd.DataFrame({"L": L, "mean": rb_curve(L, A, p, B), "stderr": stderr})


class TestCliffordGroup:

    def test_single_qubit_order(self):
        assert len(single_qubit_clifford_group()) == 24

    def test_two_qubit_order(self, group2):
        assert len(group2) == 11520

    def test_single_qubit_closure(self):
        g = single_qubit_clifford_group()
        for i in range(len(g)):
            for j in range(len(g)):
                g.compose(i, j)

    def test_single_qubit_inverses(self):
        g = single_qubit_clifford_group()
        assert all(g.compose(i, g.inverse(i)) == 0 for i in range(len(g)))

    def test_identity_is_first(self, group2):
        assert np.allclose(group2.unitaries[0], np.eye(4))

    def test_two_qubit_axioms_on_samples(self, group2):
        rng = stream(3, "axioms")
        a, b, c = (group2.sample(rng, 200) for _ in range(3))
        for i, j, k in zip(a, b, c):
            assert group2.compose(i, group2.inverse(i)) == 0
            assert group2.compose(group2.compose(i, j), k) == group2.compose(i, group2.compose(j, k))

    def test_all_tableaux_symplectic(self, group2):
        assert all(is_symplectic(Sm) for Sm in group2.symplectic)

    def test_distinct_elements(self, group2):
        keys = {Sm.tobytes() for Sm in group2.symplectic}
        # symplectic part alone identifies the element up to Pauli signs
        assert len(keys) == 720

    def test_class_sizes(self):
        sizes = class_sizes()
        assert sizes == {"local": 576, "cnot_like": 5184, "iswap_like": 5184, "swap_like": 576}
        assert sum(sizes.values()) == 11520

    @pytest.mark.parametrize("gate, name", [
        (np.eye(4), "local"),
        (CZ, "cnot_like"),
        (ISWAP, "iswap_like"),
        (SWAP, "swap_like"),
    ])
    def test_reference_gate_classes(self, group2, gate, name):
        assert group2.element(group2.index_of(gate)).clifford_class == name

    def test_non_clifford_rejected(self, group2):
        T = np.diag([1, np.exp(1j * np.pi / 4)])
        with pytest.raises(ValidationError):
            group2.index_of(np.kron(T, np.eye(2)))

    def test_three_qubits_rejected(self):
        with pytest.raises(ValidationError):
            get_clifford_group(3)

    def test_sampler_is_deterministic(self):
        a = two_qubit_clifford_sampler(11, 4)
        b = two_qubit_clifford_sampler(11, 4)
        assert a.index == b.index
        assert is_symplectic(a.symplectic)

    def test_class_frequencies(self, group2):
        n = 100_000
        drawn = group2.classes[group2.sample(stream(5, "class-frequency"), n)]
        for name, size in class_sizes().items():
            q = size / len(group2)
            count = np.sum(drawn == name)
            assert abs(count - n * q) < 3 * np.sqrt(n * q * (1 - q))

    def test_native_gate_counts(self):
        counts = native_gate_counts()
        assert counts["cz_per_clifford"] == pytest.approx(1.5)
        assert counts["single_qubit_cliffords_per_clifford"] == pytest.approx(4.9)
        assert counts["x90_per_single_qubit_clifford"] == pytest.approx(1.0)

    def test_x90_costs(self):
        costs = x90_counts()
        assert costs[0] == 0
        assert set(np.unique(costs)) <= {0, 1, 2}


class TestFidelityFormulas:

    def test_clifford_fidelity(self):
        assert clifford_fidelity(1.0) == 1.0
        assert clifford_fidelity(0.0) == 0.25
        assert clifford_fidelity(0.8024) == pytest.approx(0.8518, abs=1e-4)

    def test_single_qubit_clifford_fidelity(self):
        assert clifford_fidelity(0.9806, n_qubits=1) == pytest.approx(0.9903)

    def test_interleaved(self):
        assert interleaved_cz_fidelity(0.9, 0.9)["f_cz"] == pytest.approx(1.0)
        assert interleaved_cz_fidelity(0.0, 0.9)["f_cz"] == pytest.approx(0.25)
        assert interleaved_cz_fidelity(0.98480, 1.0)["f_cz"] == pytest.approx(0.9886, abs=1e-4)

    def test_interleaved_clamp_is_flagged(self):
        out = interleaved_cz_fidelity(0.99, 0.98)
        assert out["clamped"]
        assert out["f_cz"] == 1.0
        assert out["f_cz_unclamped"] > 1.0

    def test_interleaved_needs_positive_reference(self):
        with pytest.raises(ValidationError):
            interleaved_cz_fidelity(0.5, 0.0)

    def test_composed(self):
        assert composed_clifford_fidelity(0.0, 0.0) == 1.0
        assert composed_clifford_fidelity(0.0114, 0.0146) == pytest.approx(0.86245, abs=1e-9)

    def test_composed_is_linear(self):
        base = composed_clifford_fidelity(0.01, 0.002)
        assert base - composed_clifford_fidelity(0.02, 0.002) == pytest.approx(1.5 * 0.01)
        assert base - composed_clifford_fidelity(0.01, 0.003) == pytest.approx(8.25 * 0.001)

    def test_joint(self):
        assert joint_fidelity([0.9903, 0.9951]) == pytest.approx(0.98545, abs=1e-5)


class TestFitRB:

    def test_exact_curve(self):
        fit = fit_rb(synthetic_decay(0.5, 0.99, 0.5, [1, 2, 4, 8, 16, 32, 64, 100]))
        assert fit["p"] == pytest.approx(0.99, abs=1e-6)
        assert fit["A"] == pytest.approx(0.5, abs=1e-6)
        assert fit["B"] == pytest.approx(0.5, abs=1e-6)
        assert not fit["degenerate"]

    def test_reference_level(self):
        fit = fit_rb(synthetic_decay(0.75, 0.8024, 0.25, [1, 2, 3, 4, 6, 8, 12, 16]))
        assert clifford_fidelity(fit["p"]) == pytest.approx(0.8518, abs=1e-4)

    def test_flat_data_is_degenerate(self):
        fit = fit_rb(synthetic_decay(0.0, 0.9, 1.0, [1, 2, 4, 8]))
        assert fit["p"] == 1.0
        assert fit["degenerate"]

    def test_needs_three_lengths(self):
        with pytest.raises(ValidationError):
            fit_rb(synthetic_decay(0.5, 0.9, 0.5, [1, 1, 8, 8]))

    def test_missing_column(self):
        with pytest.raises(ValidationError):
            fit_rb(pd.DataFrame({"L": [1, 2, 3], "mean": [0.9, 0.8, 0.7]}))

    def test_zero_stderr_gets_binomial_floor(self):
        df = synthetic_decay(0.5, 0.95, 0.5, [1, 2, 4, 8, 16], stderr=0.0)
        df["n_shots"] = 250
        assert fit_rb(df)["p"] == pytest.approx(0.95, abs=1e-6)

    def test_shot_noise_consistency(self):
        rng = stream(7, "shot-noise")
        lengths = np.array([1, 2, 4, 8, 16, 32, 64, 100])
        shots, n_seq = 250, 40
        rows = []
        for L in lengths:
            survival = rng.binomial(shots, rb_curve(L, 0.75, 0.97, 0.25), size=n_seq) / shots
            rows.append({"L": L, "mean": survival.mean(), "stderr": survival.std(ddof=1) / np.sqrt(n_seq)})
        fit = fit_rb(pd.DataFrame(rows))
        assert abs(fit["p"] - 0.97) < 3 * fit["stderr"]["p"]


class TestRBSimulation:

    def test_noiseless_sequences_return(self):
        _, records = rb_run(IdealChannel(), lengths=[1, 10, 100], sequences_per_length=334,
                            shots=100, seed=1, return_records=True)
        assert len(records) >= 1000
        assert records["probability"].min() > 1 - 1e-9
        assert (records["survival"] == 1.0).all()

    def test_depolarizing_recovered(self):
        decay = rb_run(Depolarizing(0.98), lengths=[1, 2, 4, 8, 16, 32, 64],
                       sequences_per_length=30, shots=1000, seed=2)
        fit = fit_rb(decay)
        assert abs(fit["p"] - 0.98) < 3 * fit["stderr"]["p"]

    def test_decay_table_columns(self):
        decay = rb_run(lengths=[1, 2], sequences_per_length=3, shots=10, seed=0)
        assert list(decay.columns) == ["L", "mean", "stderr", "n_sequences", "n_shots"]
        assert decay["n_sequences"].tolist() == [3, 3]

    def test_bad_lengths_rejected(self):
        with pytest.raises(ValidationError):
            rb_run(lengths=[0, 2])

    def test_perfect_interleave_changes_nothing(self):
        kwargs = dict(lengths=[1, 4, 16], sequences_per_length=10, shots=200, seed=4, return_records=True)
        _, ref = rb_run(Depolarizing(0.97), **kwargs)
        _, irb = rb_run(Depolarizing(0.97), interleave=CZ, **kwargs)
        assert np.allclose(ref["probability"], irb["probability"], atol=1e-12)

    def test_seed_reproducible_across_workers(self):
        kwargs = dict(lengths=[1, 2, 4], sequences_per_length=5, shots=100, seed=9)
        serial = rb_run(Depolarizing(0.95), n_jobs=1, **kwargs)
        parallel = rb_run(Depolarizing(0.95), n_jobs=2, **kwargs)
        pd.testing.assert_frame_equal(serial, parallel)

    def test_keep_fraction_thins_shots(self):
        decay = rb_run(lengths=[1, 2, 4], sequences_per_length=20, shots=900, keep_fraction=1 / 3, seed=6)
        assert decay["n_shots"].mean() == pytest.approx(300, rel=0.1)

    def test_composite_channel(self):
        rho = np.diag([1.0, 0, 0, 0]).astype(complex)
        out = Composite([Depolarizing(0.5), UnitaryError(np.eye(4))]).apply(rho)
        assert out[0, 0].real == pytest.approx(0.5 + 0.5 / 4)

    def test_interleaved_cz_end_to_end(self):
        U = evolve(cz_with_phase_error(cz_schedule(), 0.2766))
        expected = average_gate_fidelity(U, local_phase_corrected_cz(U))
        assert 1 - expected == pytest.approx(0.0114, abs=1e-3)

        kwargs = dict(lengths=[1, 2, 4, 8, 16, 32, 64], sequences_per_length=60, shots=2000, seed=8)
        ref = fit_rb(rb_run(Depolarizing(0.99), label="ref", **kwargs))
        irb = fit_rb(rb_run(Depolarizing(0.99), interleave=CZ, interleave_channel=cz_error_channel(U),
                            label="irb", **kwargs))
        f_cz = interleaved_cz_fidelity(irb["p"], ref["p"])["f_cz_unclamped"]
        assert f_cz == pytest.approx(expected, abs=0.005)

    def test_simultaneous_joint_fidelity(self):
        out = simultaneous_rb({"Q2": Depolarizing(0.9806), "Q5": Depolarizing(0.9902)},
                              lengths=[1, 2, 4, 8, 16, 32, 64, 100], sequences_per_length=40,
                              shots=1000, seed=12)
        assert out["qubits"]["Q2"]["fidelity"] == pytest.approx(0.9903, abs=0.002)
        assert out["qubits"]["Q5"]["fidelity"] == pytest.approx(0.9951, abs=0.002)
        assert out["joint_fidelity"] == pytest.approx(0.9854, abs=0.003)

    def test_drift_series(self):
        runs = [synthetic_decay(0.75, p, 0.25, [1, 2, 4, 8, 16]) for p in (0.99, 0.98)]
        series = rb_drift_series(runs)
        assert series["p"].tolist() == pytest.approx([0.99, 0.98], abs=1e-6)
        assert series["F_C"].iloc[0] > series["F_C"].iloc[1]


class TestGaussianDecay:

    @pytest.mark.parametrize("T2, f, t_max", [(5.385, 1.0, 12.0), (39.799, 0.1, 80.0)])
    def test_recovers_t2(self, T2, f, t_max):
        t = np.linspace(0, t_max, 161)
        y = gaussian_decay(t, 0.4, f, 0.3, 0.5, T2)
        fit = fit_gaussian_decay(t, y)
        assert fit["T2"] == pytest.approx(T2, rel=0.02)
        assert fit["frequency"] == pytest.approx(f, rel=1e-3)
        assert not fit["t2_unbounded"]

    def test_recovers_with_noise(self):
        t = np.linspace(0, 12, 121)
        y = gaussian_decay(t, 0.4, 1.0, 0.0, 0.5, 5.385) + stream(1, "ramsey").normal(0, 0.01, t.size)
        assert fit_gaussian_decay(t, y)["T2"] == pytest.approx(5.385, rel=0.05)

    def test_undamped_flagged(self):
        t = np.linspace(0, 10, 101)
        fit = fit_gaussian_decay(t, 0.5 + 0.5 * np.sin(2 * np.pi * 0.7 * t))
        assert fit["t2_unbounded"]
        assert fit["T2"] >= 1e3 * 10

    def test_too_few_samples(self):
        with pytest.raises(ValidationError):
            fit_gaussian_decay([0, 1, 2, 3], [0, 1, 0, 1])


class TestBootstrap:

    def test_constant_estimator(self):
        assert bootstrap(lambda x: 1.0, np.arange(50), resamples=200) == 0.0

    def test_binomial_standard_error(self):
        shots = stream(2, "binomial").binomial(1, 0.5, size=1000)
        sigma = bootstrap(np.mean, shots, resamples=1000)
        assert sigma == pytest.approx(np.sqrt(0.25 / 1000), rel=0.2)

    def test_stable_in_resamples(self):
        shots = stream(2, "binomial").binomial(1, 0.5, size=1000)
        a = bootstrap(np.mean, shots, resamples=1000)
        b = bootstrap(np.mean, shots, resamples=2000)
        assert abs(b - a) / a < 0.1

    def test_deterministic(self):
        data = np.arange(30.0)
        assert bootstrap(np.mean, data, 200, seed=4) == bootstrap(np.mean, data, 200, seed=4)

    def test_minimum_resamples(self):
        with pytest.raises(ValidationError):
            bootstrap(np.mean, np.arange(10), resamples=50)

    def test_fit_parameter_sigma(self):
        _, records = rb_run(Depolarizing(0.97), lengths=[1, 4, 16, 32], sequences_per_length=10,
                            shots=200, seed=3, return_records=True)
        sigma = bootstrap_fit(records, resamples=100, seed=1)
        assert np.isfinite(sigma)
        assert 0 < sigma < 0.05
