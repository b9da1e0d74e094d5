# teleport/protocol.py

import logging
from dataclasses import dataclass, field
from functools import reduce
import numpy as np
import pandas as pd

from backend.config import (
    BELL_PREP_DEPOLARIZING,
    CONFUSION_MATRIX,
    LOCAL_CZ_DEPOLARIZING,
    PARITY_ERROR,
    TELEPORT_SHOTS,
)
from backend.errors import NumericalError, ValidationError
from benchmarking.bootstrap import bootstrap
from data.random_streams import stream
from dynamics.evolution import calibrate_cz, check_unitary, conditional_phase, evolve, local_phase_corrected_cz
from dynamics.hamiltonian import rx, ry, rz
from dynamics.schedule import cz_schedule
from readout.confusion import ConfusionMatrix
from readout.parity import ParityChannel, idle_dephasing
from teleport.lookup import FEEDFORWARD_PTM, PARITIES, RESOLVED, bell_lookup, ideal_branch_ptm
from tomography.pauli import PAULI_1Q, pauli_basis, ptm_average_fidelity
from tomography.qpt import prep_density_matrix, prep_labels, qpt_ptm
from tomography.qst import BASIS_ROTATIONS, COUNT_COLUMNS, bell_fidelity, qst_mle, state_counts
from tomography.qst import bootstrap_bell_fidelity, counts_to_records, records_to_counts
from tomography.spam import spam_strip

# register (Q1, Q2, Q5, Q6), Q1 most significant
Q1, Q2, Q5, Q6 = 0, 1, 2, 3
N_QUBITS = 4

CZ = np.diag([1, 1, 1, -1]).astype(complex)
X = PAULI_1Q[1]
Z = PAULI_1Q[3]
KET_0 = np.array([[1, 0], [0, 0]], dtype=complex)
KET_1 = np.array([[0, 0], [0, 1]], dtype=complex)

RECORD_COLUMNS = ["shot", "parity_1", "parity_2", "bell_label", "kept", "q2_outcome", "q1q2_parity", "tomo_setting"]

_shuttled_cz = None


@dataclass(frozen=True)
class TeleportNoise:
    bell_prep_depolarizing: float = BELL_PREP_DEPOLARIZING   # two-qubit depolarizing after the Q2-Q5 CZ
    local_cz_depolarizing: float = LOCAL_CZ_DEPOLARIZING     # after each static Q5-Q6 CZ
    parity_error: float = PARITY_ERROR                       # flip of each Q5-Q6 parity readout
    confusion: tuple = tuple(map(tuple, CONFUSION_MATRIX))   # Q1-Q2 verification readout
    idle_dephasing: float = 0.0                              # Z-dephasing of Q2 between the parity readouts
    local_cz_phase_error: float = 0.0                        # ZZ over-rotation of the static CZ (rad)
    dephase_odd: bool = True
    shuttled_cz: bool = True                                 # Q2-Q5 CZ from the dynamics pulse
    bell_cz: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        bad = [f"{k}: {getattr(self, k)}" for k in
               ("bell_prep_depolarizing", "local_cz_depolarizing", "parity_error", "idle_dephasing")
               if not 0.0 <= getattr(self, k) <= 1.0]
        if not np.isfinite(self.local_cz_phase_error):
            bad.append(f"local_cz_phase_error: {self.local_cz_phase_error}")
        if bad:
            raise ValidationError("Teleport noise knobs must be probabilities", bad)
        ConfusionMatrix(self.confusion)
        if self.bell_cz is not None:
            check_unitary(self.bell_cz, "bell_cz")

    @classmethod
    def ideal(cls):
        return cls(0.0, 0.0, 0.0, ((1.0, 0.0), (0.0, 1.0)), 0.0, shuttled_cz=False)


@dataclass(frozen=True)
class TeleportConfig:
    input_state: np.ndarray = field(default_factory=lambda: KET_0.copy(), compare=False)
    tomo_unitary: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex), compare=False)
    noise: TeleportNoise = field(default_factory=TeleportNoise)
    shots: int = TELEPORT_SHOTS
    ordering: str = "before"
    input_label: str = "0"
    tomo_setting: str = "Z"

    def __post_init__(self):
        errors = []
        rho = np.asarray(self.input_state, dtype=complex)
        if rho.shape != (2, 2) or not np.all(np.isfinite(rho)):
            errors.append(f"input_state: expected a finite 2x2 matrix, got shape {rho.shape}")
        if self.shots <= 0:
            errors.append(f"shots: must be positive, got {self.shots}")
        if self.ordering not in ("before", "after"):
            errors.append(f"ordering: must be 'before' or 'after', got {self.ordering}")
        if errors:
            raise ValidationError("Invalid teleport configuration", errors)
        check_unitary(self.tomo_unitary, "tomo_unitary")


def rabi_input(angle):
    """Q6 after a Rabi burst of the given rotation angle."""
    v = rx(angle) @ np.array([1, 0], dtype=complex)
    return np.outer(v, v.conj())


def phase_input(theta1):
    """Q6 prepared by Rx(pi/2) followed by Rz(theta1)."""
    v = rz(theta1) @ rx(np.pi / 2) @ np.array([1, 0], dtype=complex)
    return np.outer(v, v.conj())


def phase_tomography(theta2):
    """Rz(theta2) then Rx(pi/2) on Q2 before its readout."""
    return rx(np.pi / 2) @ rz(theta2)


def shuttled_bell_cz(schedule=None):
    """Shuttling CZ from the dynamics module with its single-qubit phases removed."""
    U = evolve(calibrate_cz(schedule or cz_schedule()))
    return CZ @ (local_phase_corrected_cz(U).conj().T @ U)


def get_shuttled_bell_cz():
    global _shuttled_cz
    if _shuttled_cz is None:
        _shuttled_cz = shuttled_bell_cz()
        logging.info(f"Shuttled Bell CZ ready | conditional_phase={conditional_phase(_shuttled_cz):.6f}")
    return _shuttled_cz


def _bell_cz(noise):
    if noise.bell_cz is not None:
        return np.asarray(noise.bell_cz)
    return get_shuttled_bell_cz() if noise.shuttled_cz else CZ


def _embed(op, start):
    k = int(round(np.log2(op.shape[0])))
    return reduce(np.kron, [np.eye(2 ** start), op, np.eye(2 ** (N_QUBITS - start - k))])


def _apply(rho, op, start):
    U = _embed(op, start)
    return U @ rho @ U.conj().T


def _depolarize_pair(rho, start, lam):
    """rho -> (1 - lam) rho + lam (I/4 on the pair) (x) tr_pair(rho)."""
    if lam == 0.0:
        return rho
    twirl = sum(_apply(rho, P, start) for P in pauli_basis(2)) / 16.0
    return (1.0 - lam) * rho + lam * twirl


def _local_cz(noise):
    return np.diag([1, 1, 1, -np.exp(1j * noise.local_cz_phase_error)])


def _native_cnot(rho, noise):
    """CNOT Q5 -> Q6 as Ry(pi/2) on Q6, static CZ, Ry(-pi/2) on Q6."""
    rho = _apply(rho, ry(np.pi / 2), Q6)
    rho = _apply(rho, _local_cz(noise), Q5)
    rho = _depolarize_pair(rho, Q5, noise.local_cz_depolarizing)
    return _apply(rho, ry(-np.pi / 2), Q6)


def _bell_pair(rho, noise):
    """Q2-Q5 into (|00> + |11>)/sqrt(2) through the shuttling CZ."""
    rho = _apply(rho, np.kron(ry(np.pi / 2), ry(np.pi / 2)), Q2)
    rho = _apply(rho, _bell_cz(noise), Q2)
    rho = _apply(rho, ry(-np.pi / 2), Q5)
    rho = _apply(rho, Z, Q2)
    return _depolarize_pair(rho, Q2, noise.bell_prep_depolarizing)


def _reduce_q2(rho):
    return np.einsum("abcdaecd->be", rho.reshape((2,) * 8))


def branch_states(input_state, noise, tomo_unitary=None, ordering="before"):
    """
    Unnormalized Q2 states for each reported pair of parity outcomes.

    The input may be any 2x2 operator; the map is linear in it, so Pauli
    inputs give the process directly.

    Returns:
        dict (parity_1, parity_2) -> 2x2 matrix
    """
    tomo = np.eye(2, dtype=complex) if tomo_unitary is None else np.asarray(tomo_unitary)
    rho = reduce(np.kron, [KET_1, KET_0, KET_0, np.asarray(input_state, dtype=complex)])
    rho = _bell_pair(rho, noise)
    if ordering == "before":
        rho = _apply(rho, tomo, Q2)

    # Bell-basis to computational-basis map on (Q5, Q6)
    rho = _native_cnot(rho, noise)
    rho = _apply(rho, ry(np.pi / 2), Q5)
    rho = _apply(rho, X, Q6)

    parity = ParityChannel((Q5, Q6), N_QUBITS, noise.dephase_odd, "Q5Q6")
    true = {}
    for p1 in PARITIES:
        branch = idle_dephasing(parity.branch(rho, p1), [Q2], noise.idle_dephasing, N_QUBITS)
        branch = _native_cnot(branch, noise)
        for p2 in PARITIES:
            final = parity.branch(branch, p2)
            if ordering == "after":
                final = _apply(final, tomo, Q2)
            true[(p1, p2)] = _reduce_q2(final)

    eps = noise.parity_error
    reported = {}
    for r in true:
        reported[r] = sum(
            ((1 - eps) if t[0] == r[0] else eps) * ((1 - eps) if t[1] == r[1] else eps) * state
            for t, state in true.items()
        )
    return reported


def branch_distribution(cfg):
    """
    Exact probability of every (parity_1, parity_2, Q2 readout) cell.

    Returns:
        DataFrame (parity_1, parity_2, bell_label, q2_outcome, probability)
    """
    states = branch_states(cfg.input_state, cfg.noise, cfg.tomo_unitary, cfg.ordering)
    M = ConfusionMatrix(cfg.noise.confusion).matrix
    rows = []
    for (p1, p2), sigma in states.items():
        measured = M @ np.clip(np.real(np.diag(sigma)), 0.0, None)
        label = bell_lookup(p1, p2).bell_label
        rows += [{"parity_1": p1, "parity_2": p2, "bell_label": label, "q2_outcome": m, "probability": float(measured[m])}
                 for m in (0, 1)]
    df = pd.DataFrame(rows)
    df["probability"] /= df["probability"].sum()
    return df


def _stream(cfg, seed, key):
    return stream(seed, key, cfg.input_label, cfg.tomo_setting)


def run_protocol(cfg, seed=0):
    """
    Shot records of the post-selected protocol.

    Q1 is prepared up, so a parallel Q1-Q2 readout means Q2 read as 1.
    Feedforward is bookkeeping only: `bell_label` names the correction.
    """
    dist = branch_distribution(cfg)
    cells = _stream(cfg, seed, "teleport-shots").choice(len(dist), size=int(cfg.shots), p=dist["probability"].to_numpy())
    rec = dist.iloc[cells].reset_index(drop=True)
    records = pd.DataFrame({
        "shot": np.arange(int(cfg.shots)),
        "parity_1": rec["parity_1"],
        "parity_2": rec["parity_2"],
        "bell_label": rec["bell_label"],
        "kept": rec["bell_label"].isin(RESOLVED),
        "q2_outcome": rec["q2_outcome"].astype(int),
        "q1q2_parity": np.where(rec["q2_outcome"] == 1, "even", "odd"),
        "tomo_setting": cfg.tomo_setting,
    })
    logging.info(f"Teleport run: shots={cfg.shots} | kept={records['kept'].mean():.4f} | ordering={cfg.ordering}")
    return records[RECORD_COLUMNS]


def summarize_branches(records):
    """Post-selected parallel probability per resolved Bell outcome."""
    kept = records[records["kept"]]
    out = kept.groupby("bell_label").agg(shots_kept=("shot", "size"),
                                         P_parallel=("q1q2_parity", lambda s: float(np.mean(s == "even"))))
    return out.reindex(list(RESOLVED)).reset_index()


def _branch_counts(cfg, seed, key, branch):
    """Sampled (Q2 outcome 0, Q2 outcome 1) counts and exact P(parallel) within a branch."""
    dist = branch_distribution(cfg)
    counts = _stream(cfg, seed, key).multinomial(int(cfg.shots), dist["probability"].to_numpy())
    mask = (dist["bell_label"] == branch).to_numpy()
    outcome = dist["q2_outcome"].to_numpy()
    n = np.array([counts[mask & (outcome == m)].sum() for m in (0, 1)])
    p = dist["probability"].to_numpy()
    p_branch = np.array([p[mask & (outcome == m)].sum() for m in (0, 1)])
    return n, float(p_branch[1] / p_branch.sum())


def rabi_sweep(angles, noise=None, shots=TELEPORT_SHOTS, seed=0):
    """Branch-resolved Q1-Q2 parallel probability versus the Rabi angle on Q6."""
    noise = noise or TeleportNoise()
    rows = []
    for i, angle in enumerate(np.asarray(angles, dtype=float)):
        cfg = TeleportConfig(rabi_input(angle), noise=noise, shots=shots, input_label=f"rabi-{i}")
        for branch in RESOLVED:
            n, exact = _branch_counts(cfg, seed, "teleport-rabi", branch)
            rows.append({"angle_rad": float(angle), "bell_label": branch, "shots_kept": int(n.sum()),
                         "P_parallel": float(n[1] / n.sum()) if n.sum() else np.nan, "P_parallel_exact": exact})
    return pd.DataFrame(rows)


def phase_map(theta1, theta2, noise=None, shots=TELEPORT_SHOTS, seed=0, branch="Psi+"):
    """Post-selected parallel probability over the (theta1, theta2) grid of the phase-transfer sequence."""
    noise = noise or TeleportNoise()
    rows = []
    for i, t1 in enumerate(np.asarray(theta1, dtype=float)):
        for j, t2 in enumerate(np.asarray(theta2, dtype=float)):
            cfg = TeleportConfig(phase_input(t1), phase_tomography(t2), noise, shots,
                                 input_label=f"theta1-{i}", tomo_setting=f"theta2-{j}")
            n, exact = _branch_counts(cfg, seed, "teleport-phase", branch)
            rows.append({"theta1_rad": float(t1), "theta2_rad": float(t2), "shots_kept": int(n.sum()),
                         "P_parallel": float(n[1] / n.sum()) if n.sum() else np.nan, "P_parallel_exact": exact})
    return pd.DataFrame(rows)


def qpt_counts(noise=None, shots=TELEPORT_SHOTS, seed=0, branch="Psi+", ordering="before"):
    """
    Process-tomography counts (prep, basis, outcome, count) of one branch.

    `shots` are taken per (prep, basis) setting before post-selection.
    """
    noise = noise or TeleportNoise()
    rows = []
    for prep in prep_labels(1):
        for basis, R in BASIS_ROTATIONS.items():
            cfg = TeleportConfig(prep_density_matrix(prep), R, noise, shots, ordering, prep, basis)
            n, _ = _branch_counts(cfg, seed, "teleport-qpt", branch)
            rows += [{"prep": prep, "basis": basis, "outcome": str(m), "count": int(n[m])} for m in (0, 1)]
    return pd.DataFrame(rows, columns=COUNT_COLUMNS)


def teleport_branch_channel(branch="Psi+", noise=None, ordering="before", feedforward=False):
    """
    PTM of the post-selected map Q6 -> Q2 on one branch, before feedforward
    unless `feedforward` is set.

    Verification readout errors are excluded; they act after the channel.
    """
    noise = noise or TeleportNoise()
    keys = [k for k in ((a, b) for a in PARITIES for b in PARITIES) if bell_lookup(*k).bell_label == branch]
    if not keys:
        raise ValidationError(f"Unknown Bell branch '{branch}'")

    def out(op):
        states = branch_states(op, noise, ordering=ordering)
        return sum(states[k] for k in keys)

    p_branch = np.trace(out(np.eye(2) / 2)).real
    R = np.zeros((4, 4))
    for j, Pj in enumerate(PAULI_1Q):
        Ej = out(Pj) / p_branch
        for i, Pi in enumerate(PAULI_1Q):
            R[i, j] = np.real(np.trace(Pi @ Ej)) / 2
    if feedforward:
        R = FEEDFORWARD_PTM[bell_lookup(*keys[0]).feedforward] @ R
    return R


def analytic_average_fidelity(noise):
    """
    Closed-form post-selected Psi+ fidelity for depolarizing Bell-prep and
    local-CZ errors and symmetric parity flips (no idle dephasing).
    """
    eps = noise.parity_error
    lam2 = noise.local_cz_depolarizing
    good = (1 - noise.bell_prep_depolarizing) * (1 - lam2)
    s = (1 - lam2) * (1 - eps) + lam2 / 2
    right = (1 - eps) * s
    return float(good * (right + (1 - right) / 3) + (1 - good) / 2)


def teleport_fidelity_from_bell(F_bell):
    """Teleportation fidelity (1 + 2 F_bell) / 3 of a Bell resource."""
    if not 0.0 <= F_bell <= 1.0:
        raise ValidationError("Bell fidelity must lie in [0, 1]", [f"F_bell: {F_bell}"])
    return float((1.0 + 2.0 * F_bell) / 3.0)


def _complete_counts(c):
    full = pd.MultiIndex.from_product([prep_labels(1), list(BASIS_ROTATIONS), ["0", "1"]],
                                      names=["prep", "basis", "outcome"])
    return c.groupby(["prep", "basis", "outcome"])["count"].sum().reindex(full, fill_value=0).reset_index()


def process_fidelity_from_counts(counts, branch="Psi+", confusion=None):
    """CPTP PTM and average fidelity against the ideal branch PTM, optionally SPAM-stripped."""
    if confusion is not None:
        counts = spam_strip(counts, confusion)
    estimate = qpt_ptm(counts, 1)
    R_ideal = ideal_branch_ptm(branch)
    return estimate, ptm_average_fidelity(estimate.ptm, R_ideal, 2)


def teleport_qpt(noise=None, shots=TELEPORT_SHOTS, seed=0, branch="Psi+", spam_correct=True, resamples=0):
    """
    Process tomography of the teleportation channel on one branch.

    Returns:
        dict with ptm, ptm_ideal, F_avg, F_avg_std (bootstrap, 0 when resamples=0),
        the exact channel fidelity, residuals and the counts table
    """
    noise = noise or TeleportNoise()
    counts = qpt_counts(noise, shots, seed, branch)
    confusion = noise.confusion if spam_correct else None
    estimate, F = process_fidelity_from_counts(counts, branch, confusion)

    sigma = 0.0
    if resamples:
        def estimator(sample):
            try:
                return process_fidelity_from_counts(_complete_counts(records_to_counts(sample)), branch, confusion)[1]
            except (NumericalError, ValidationError):
                return np.nan
        sigma = bootstrap(estimator, counts_to_records(counts), resamples, seed, key="bootstrap-qpt")

    R_exact = teleport_branch_channel(branch, noise)
    F_exact = ptm_average_fidelity(R_exact, ideal_branch_ptm(branch), 2)
    logging.info(f"Teleport QPT: branch={branch} | F_avg={F:.4f} +/- {sigma:.4f} | exact={F_exact:.4f}")
    return {
        "branch": branch,
        "ptm": estimate.ptm,
        "ptm_ideal": ideal_branch_ptm(branch),
        "F_avg": F,
        "F_avg_std": sigma,
        "F_avg_exact": F_exact,
        "residual_ls": estimate.residual_ls,
        "residual_cptp": estimate.residual_cptp,
        "choi_min_eigenvalue": estimate.choi_min_eigenvalue,
        "counts": counts,
    }


def bell_pair_state(noise=None, pair="Q2Q5"):
    """Two-qubit density matrix of the Q2-Q5 resource or the static Q5-Q6 pair."""
    noise = noise or TeleportNoise()
    if pair == "Q2Q5":
        rho = reduce(np.kron, [KET_1, KET_0, KET_0, KET_0])
        rho = _bell_pair(rho, noise)
        return np.einsum("abcdaefd->bcef", rho.reshape((2,) * 8)).reshape(4, 4)
    if pair == "Q5Q6":
        rho = np.kron(KET_0, KET_0)
        U = np.kron(ry(np.pi / 2), ry(np.pi / 2))
        W = _local_cz(noise) @ U
        rho = W @ rho @ W.conj().T
        lam = noise.local_cz_depolarizing
        rho = (1 - lam) * rho + lam * np.eye(4) / 4
        V = np.kron(np.eye(2), ry(-np.pi / 2))
        return V @ rho @ V.conj().T
    raise ValidationError(f"Unknown pair '{pair}'", ["pair: use Q2Q5 or Q5Q6"])


def resource_bell_fidelity(noise=None, shots=1000, seed=0, pair="Q2Q5", resamples=0):
    """Bell fidelity of a pair from synthetic state tomography with maximum likelihood."""
    rho = bell_pair_state(noise, pair)
    counts = state_counts(rho, shots, seed, prep=pair)
    F, phi = bell_fidelity(qst_mle(counts, 2).rho)
    sigma = 0.0
    if resamples:
        sigma = bootstrap_bell_fidelity(counts, resamples, seed)
    return {"pair": pair, "F_bell": F, "phase": phi, "F_bell_std": sigma,
            "F_bell_exact": bell_fidelity(rho)[0]}


def fidelity_series(noises, shots=TELEPORT_SHOTS, seed=0, resamples=0, branch="Psi+"):
    """Teleport and resource Bell fidelities for consecutive runs, one noise setting per run."""
    rows = []
    for run, noise in enumerate(noises):
        qpt = teleport_qpt(noise, shots, seed + run, branch, resamples=resamples)
        bell = resource_bell_fidelity(noise, seed=seed + run)
        rows.append({"run": run, "F_avg": qpt["F_avg"], "F_avg_std": qpt["F_avg_std"],
                     "F_avg_exact": qpt["F_avg_exact"], "F_bell": bell["F_bell"],
                     "F_tele_from_bell": teleport_fidelity_from_bell(bell["F_bell"])})
    return pd.DataFrame(rows)


def ordering_comparison(noise=None, shots=10000, seed=0, branch="Psi+"):
    """
    Post-selected outcome statistics with the tomography pulse before the
    Bell measurement versus after feedforward, on identical random streams.

    Returns:
        dict with per-setting two-proportion z-scores, max_abs_z and agree
    """
    noise = noise or TeleportNoise()
    before = qpt_counts(noise, shots, seed, branch, "before")
    after = qpt_counts(noise, shots, seed, branch, "after")
    rows = []
    for (prep, basis), b in before.groupby(["prep", "basis"], sort=False):
        a = after[(after["prep"] == prep) & (after["basis"] == basis)]
        nb, na = b["count"].sum(), a["count"].sum()
        kb = b.loc[b["outcome"] == "0", "count"].sum()
        ka = a.loc[a["outcome"] == "0", "count"].sum()
        pool = (kb + ka) / (nb + na)
        se = np.sqrt(pool * (1 - pool) * (1 / nb + 1 / na))
        diff = kb / nb - ka / na
        z = 0.0 if diff == 0 else (diff / se if se > 0 else np.inf)
        rows.append({"prep": prep, "basis": basis, "p_before": kb / nb, "p_after": ka / na, "z": float(z)})
    table = pd.DataFrame(rows)
    max_z = float(table["z"].abs().max())
    agree = max_z < 3.0
    if not agree:
        logging.warning(f"Tomography ordering changes post-selected statistics: max |z| = {max_z:.2f}")
    return {"table": table, "max_abs_z": max_z, "agree": bool(agree)}


def ordering_equivalence_check(noise=None, shots=10000, seed=0, branch="Psi+"):
    return ordering_comparison(noise, shots, seed, branch)["agree"]
