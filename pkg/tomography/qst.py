# tomography/qst.py

import logging
from dataclasses import dataclass
from functools import reduce
from itertools import product
import numpy as np
import pandas as pd

from backend.config import BOOTSTRAP_RESAMPLES, MLE_DILUTION, MLE_MAX_ITER, MLE_TOL
from backend.errors import NumericalError, ValidationError
from benchmarking.bootstrap import bootstrap
from data.random_streams import stream
from dynamics.hamiltonian import rx, ry
from tomography.pauli import pauli_basis, pauli_labels, state_from_pauli_vector

COUNT_COLUMNS = ["prep", "basis", "outcome", "count"]

# pre-rotation that maps each basis onto Z; outcome 0 is the +1 eigenstate
BASIS_ROTATIONS = {
    "Z": np.eye(2, dtype=complex),
    "X": ry(-np.pi / 2),
    "Y": rx(np.pi / 2),
}


@dataclass(frozen=True)
class DensityMatrixEstimate:
    rho: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool


def basis_rotation(basis):
    try:
        return reduce(np.kron, [BASIS_ROTATIONS[b] for b in basis])
    except KeyError:
        raise ValidationError(f"Unknown measurement basis '{basis}'", [f"basis: use letters of {sorted(BASIS_ROTATIONS)}"])


def outcome_labels(n_qubits):
    return ["".join(bits) for bits in product("01", repeat=n_qubits)]


def measurement_projector(basis, outcome):
    """Projector R^dag |outcome><outcome| R of one basis setting."""
    R = basis_rotation(basis)
    e = np.zeros(R.shape[0], dtype=complex)
    e[int(outcome, 2)] = 1.0
    v = R.conj().T @ e
    return np.outer(v, v.conj())


def product_bases(n_qubits):
    return ["".join(b) for b in product("XYZ", repeat=n_qubits)]


def basis_probabilities(rho, basis):
    R = basis_rotation(basis)
    return np.clip(np.real(np.diag(R @ rho @ R.conj().T)), 0.0, None)


def state_counts(rho, shots, seed=0, bases=None, prep="state", exact=False):
    """
    Synthetic tomography counts of a state in Pauli product bases.

    With `exact` the expected counts (shots times probability) are returned
    instead of a multinomial draw.
    """
    rho = np.asarray(rho, dtype=complex)
    n = int(round(np.log2(rho.shape[0])))
    bases = bases or product_bases(n)
    rows = []
    for basis in bases:
        p = basis_probabilities(rho, basis)
        p = p / p.sum()
        counts = shots * p if exact else stream(seed, "qst", prep, basis).multinomial(int(shots), p)
        rows += [{"prep": prep, "basis": basis, "outcome": o, "count": c}
                 for o, c in zip(outcome_labels(n), counts)]
    return pd.DataFrame(rows, columns=COUNT_COLUMNS)


def check_counts(counts):
    missing = [c for c in ("basis", "outcome", "count") if c not in counts.columns]
    if missing:
        raise ValidationError("Counts table is missing columns", [f"{c}: required" for c in missing])
    if (counts["count"] < 0).any():
        raise ValidationError("Counts must be non-negative")
    return counts


def _frequencies(counts):
    """Per-row frequencies within each basis setting."""
    totals = counts.groupby("basis")["count"].transform("sum").to_numpy(dtype=float)
    if np.any(totals <= 0):
        raise ValidationError("Every basis setting needs at least one count")
    return counts["count"].to_numpy(dtype=float) / totals


def _missing_directions(design, labels, tol=1e-9):
    """Labels of coordinates outside the row space of the design matrix."""
    null = np.eye(design.shape[1]) - np.linalg.pinv(design) @ design
    return [labels[k] for k in range(design.shape[1]) if np.linalg.norm(null[:, k]) > tol]


def _pauli_design(projectors, n_qubits):
    d = 2 ** n_qubits
    P = pauli_basis(n_qubits)
    return np.real(np.einsum("rij,kji->rk", projectors, P)) / d


def linear_inversion_state(counts, n_qubits=None):
    """Least-squares Pauli-vector estimate of the state; may be unphysical."""
    counts = check_counts(counts)
    n = n_qubits or len(counts["basis"].iloc[0])
    projectors = np.array([measurement_projector(b, o) for b, o in zip(counts["basis"], counts["outcome"])])
    design = _pauli_design(projectors, n)
    missing = _missing_directions(design, pauli_labels(n))
    if missing:
        raise NumericalError(f"Tomography design is rank deficient; missing directions {missing}")
    r, *_ = np.linalg.lstsq(design, _frequencies(counts), rcond=None)
    rho = state_from_pauli_vector(r)
    return rho / np.trace(rho).real


def project_to_density_matrix(rho):
    """Closest density matrix in Frobenius norm (eigenvalues projected onto the simplex)."""
    rho = (np.asarray(rho) + np.asarray(rho).conj().T) / 2
    w, V = np.linalg.eigh(rho)
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.nonzero(u - css / np.arange(1, u.size + 1) > 0)[0][-1]
    w = np.clip(w - css[k] / (k + 1), 0.0, None)
    return (V * w) @ V.conj().T


def _log_likelihood(rho, projectors, freqs, mask):
    p = np.real(np.einsum("rij,ji->r", projectors, rho))
    return float(np.sum(freqs[mask] * np.log(np.clip(p[mask], 1e-300, None)))), p


def qst_mle(counts, n_qubits=None, dilution=MLE_DILUTION, tol=MLE_TOL, max_iter=MLE_MAX_ITER):
    """
    Maximum-likelihood density matrix from tomography counts.

    Diluted R rho R iteration, rho <- (I + e R) rho (I + e R) / tr, where R is
    the likelihood gradient normalized to the identity at the optimum. Stops
    when the per-shot log-likelihood gain drops below `tol`.
    """
    counts = check_counts(counts)
    n = n_qubits or len(counts["basis"].iloc[0])
    d = 2 ** n
    projectors = np.array([measurement_projector(b, o) for b, o in zip(counts["basis"], counts["outcome"])])
    missing = _missing_directions(_pauli_design(projectors, n), pauli_labels(n))
    if missing:
        raise NumericalError(f"Tomography design is rank deficient; missing directions {missing}")

    freqs = _frequencies(counts)
    n_settings = counts["basis"].nunique()
    freqs_norm = freqs / n_settings
    mask = freqs > 0
    eye = np.eye(d)
    rho = eye / d
    ll, p = _log_likelihood(rho, projectors, freqs_norm, mask)
    converged = False
    for it in range(1, max_iter + 1):
        weights = np.where(mask, freqs_norm / np.clip(p, 1e-300, None), 0.0)
        R = np.einsum("r,rij->ij", weights, projectors)
        step = eye + dilution * R
        rho_new = step @ rho @ step
        rho_new = rho_new / np.trace(rho_new).real
        ll_new, p = _log_likelihood(rho_new, projectors, freqs_norm, mask)
        gain = ll_new - ll
        rho, ll = rho_new, ll_new
        if abs(gain) < tol:
            converged = True
            break
    if not converged:
        logging.warning(f"QST MLE stopped at max_iter={max_iter} with gain {gain:.3g}")
    rho = (rho + rho.conj().T) / 2
    logging.info(f"QST MLE: qubits={n} | iterations={it} | logL={ll:.6f}")
    return DensityMatrixEstimate(rho, ll, it, converged)


def bell_fidelity(rho):
    """
    Overlap with the closest Bell state (|00> + e^{i phi}|11>)/sqrt(2) or
    (|01> + e^{i phi}|10>)/sqrt(2), maximized over phi in closed form.

    Returns:
        (F, phi*) with phi* in (-pi, pi]
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValidationError("Bell fidelity needs a two-qubit density matrix", [f"shape: {rho.shape}"])
    phi_family = 0.5 * (rho[0, 0] + rho[3, 3]).real + abs(rho[0, 3])
    psi_family = 0.5 * (rho[1, 1] + rho[2, 2]).real + abs(rho[1, 2])
    coherence = rho[0, 3] if phi_family >= psi_family else rho[1, 2]
    phi = -np.angle(coherence) if abs(coherence) > 0 else 0.0
    if phi <= -np.pi:
        phi += 2 * np.pi
    return float(max(phi_family, psi_family)), float(phi)


def counts_to_records(counts):
    """One row per shot, (prep, basis, outcome)."""
    cols = [c for c in ("prep", "basis", "outcome") if c in counts.columns]
    reps = np.rint(counts["count"].to_numpy(dtype=float)).astype(int)
    return counts.loc[counts.index.repeat(reps), cols].reset_index(drop=True)


def records_to_counts(records):
    keys = [c for c in ("prep", "basis", "outcome") if c in records.columns]
    return records.groupby(keys, sort=True).size().rename("count").reset_index()


def bootstrap_bell_fidelity(counts, resamples=BOOTSTRAP_RESAMPLES, seed=0, estimator="mle"):
    """Bootstrap sigma of the Bell fidelity, resampling individual shots."""

    def reconstruct(c):
        return qst_mle(c, 2).rho if estimator == "mle" else project_to_density_matrix(linear_inversion_state(c, 2))

    def fidelity(sample):
        c = records_to_counts(sample)
        full = pd.MultiIndex.from_product([product_bases(2), outcome_labels(2)], names=["basis", "outcome"])
        c = c.groupby(["basis", "outcome"])["count"].sum().reindex(full, fill_value=0).reset_index()
        try:
            return bell_fidelity(reconstruct(c))[0]
        except (NumericalError, ValidationError):
            return np.nan

    sigma = bootstrap(fidelity, counts_to_records(counts), resamples, seed, key="bootstrap-bell")
    logging.info(f"Bell fidelity bootstrap: sigma={sigma:.4g} | resamples={resamples}")
    return sigma


def density_matrix_to_json(rho):
    """Row-major [re, im] pairs."""
    rho = np.asarray(rho, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in rho]
