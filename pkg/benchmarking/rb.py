# benchmarking/rb.py

import logging
import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from backend.config import N_JOBS, RB_LENGTHS, RB_SEQUENCES, RB_SHOTS
from backend.errors import ValidationError
from benchmarking.clifford import get_clifford_group
from benchmarking.fitting import clifford_fidelity, fit_rb, joint_fidelity
from data.random_streams import stream
from dynamics.evolution import check_unitary, local_phase_corrected_cz

DECAY_COLUMNS = ["L", "mean", "stderr", "n_sequences", "n_shots"]
RECORD_COLUMNS = ["L", "sequence", "probability", "kept_shots", "counts", "survival"]


class IdealChannel:

    def apply(self, rho):
        return rho


class Depolarizing:
    """rho -> p rho + (1 - p) I / d."""

    def __init__(self, p):
        if not 0.0 <= p <= 1.0:
            raise ValidationError("Depolarizing parameter must lie in [0, 1]", [f"p: {p}"])
        self.p = float(p)

    def apply(self, rho):
        d = rho.shape[0]
        return self.p * rho + (1.0 - self.p) * np.eye(d) / d


class UnitaryError:

    def __init__(self, U):
        self.U = check_unitary(U, "error unitary")

    def apply(self, rho):
        return self.U @ rho @ self.U.conj().T


class Composite:
    """Channels applied left to right."""

    def __init__(self, channels):
        self.channels = list(channels)

    def apply(self, rho):
        for ch in self.channels:
            rho = ch.apply(rho)
        return rho


def cz_error_channel(U):
    """Residual error of an evolved CZ once its single-qubit Z phases are corrected."""
    return UnitaryError(local_phase_corrected_cz(U).conj().T @ U)


def _run_length(L, n_sequences, shots, channel, n_qubits, interleave, interleave_channel,
                keep_fraction, seed, label):
    group = get_clifford_group(n_qubits)
    d = group.dim
    rows = []
    for s in range(n_sequences):
        rng = stream(seed, label, int(L), s)
        rho = np.zeros((d, d), dtype=complex)
        rho[0, 0] = 1.0
        net = np.eye(d, dtype=complex)
        for idx in group.sample(rng, int(L)):
            U = group.unitaries[idx]
            rho = channel.apply(U @ rho @ U.conj().T)
            net = U @ net
            if interleave is not None:
                rho = interleave @ rho @ interleave.conj().T
                if interleave_channel is not None:
                    rho = interleave_channel.apply(rho)
                net = interleave @ net
        recovery = net.conj().T
        rho = channel.apply(recovery @ rho @ recovery.conj().T)

        prob = float(np.clip(rho[0, 0].real, 0.0, 1.0))
        kept = int(rng.binomial(shots, keep_fraction)) if keep_fraction < 1.0 else int(shots)
        counts = int(rng.binomial(kept, prob)) if kept else 0
        rows.append({
            "L": int(L), "sequence": s, "probability": prob, "kept_shots": kept,
            "counts": counts, "survival": counts / kept if kept else np.nan,
        })
    return rows


def summarize_records(records):
    """Per-length mean survival with the standard error over sequences."""
    grouped = records.dropna(subset=["survival"]).groupby("L")
    out = pd.DataFrame({
        "mean": grouped["survival"].mean(),
        "stderr": grouped["survival"].std(ddof=1).fillna(0.0) / np.sqrt(grouped["survival"].count()),
        "n_sequences": grouped["survival"].count(),
        "n_shots": grouped["kept_shots"].mean(),
    }).reset_index()
    return out[DECAY_COLUMNS]


def rb_run(channel=None, lengths=None, sequences_per_length=RB_SEQUENCES, shots=RB_SHOTS,
           n_qubits=2, interleave=None, interleave_channel=None, keep_fraction=1.0,
           seed=0, n_jobs=N_JOBS, return_records=False, label="rb"):
    """
    Simulate (interleaved) randomized benchmarking on the density matrix.

    Each Clifford is followed by `channel`; with `interleave` set, the given
    unitary and its `interleave_channel` follow every Clifford. The recovery
    Clifford inverts the ideal sequence so a perfect run returns |0...0>.
    Shots are post-selected with probability `keep_fraction` before counting.

    Returns:
        Decay DataFrame (L, mean, stderr, n_sequences, n_shots), plus the
        per-sequence records when return_records is set
    """
    channel = channel or IdealChannel()
    lengths = list(lengths or RB_LENGTHS)
    if not lengths or min(lengths) < 1:
        raise ValidationError("RB lengths must be >= 1", [f"lengths: {lengths}"])
    if interleave is not None:
        interleave = check_unitary(interleave, "interleave")

    chunks = Parallel(n_jobs=n_jobs)(
        delayed(_run_length)(L, sequences_per_length, shots, channel, n_qubits, interleave,
                             interleave_channel, keep_fraction, seed, label)
        for L in lengths
    )
    records = pd.DataFrame([r for chunk in chunks for r in chunk], columns=RECORD_COLUMNS)
    decay = summarize_records(records)
    logging.info(
        f"RB run: label={label} | qubits={n_qubits} | lengths={len(lengths)} | "
        f"sequences={sequences_per_length} | shots={shots}"
    )
    return (decay, records) if return_records else decay


def simultaneous_rb(channels, lengths=None, sequences_per_length=RB_SEQUENCES, shots=RB_SHOTS,
                    keep_fraction=1.0, seed=0, n_jobs=N_JOBS):
    """
    Single-qubit RB on each qubit with independent Clifford streams.

    Args:
        channels: dict qubit name -> channel applied after each Clifford

    Returns:
        dict qubit -> {decay, fit, fidelity} and the joint fidelity
    """
    results = {}
    for qubit, channel in channels.items():
        decay = rb_run(channel, lengths, sequences_per_length, shots, n_qubits=1,
                       keep_fraction=keep_fraction, seed=seed, n_jobs=n_jobs, label=f"srb-{qubit}")
        fit = fit_rb(decay)
        results[qubit] = {"decay": decay, "fit": fit, "fidelity": clifford_fidelity(fit["p"], 1)}
    joint = joint_fidelity(r["fidelity"] for r in results.values())
    logging.info(f"Simultaneous RB: joint fidelity={joint:.4f}")
    return {"qubits": results, "joint_fidelity": joint}


def rb_drift_series(runs, n_qubits=2):
    """Fitted decay parameter and Clifford fidelity for each of several decay tables."""
    rows = []
    for k, decay in enumerate(runs):
        fit = fit_rb(decay)
        rows.append({"run": k, "p": fit["p"], "p_stderr": fit["stderr"]["p"],
                     "F_C": clifford_fidelity(fit["p"], n_qubits)})
    return pd.DataFrame(rows, columns=["run", "p", "p_stderr", "F_C"])
