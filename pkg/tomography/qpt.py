# tomography/qpt.py

import logging
from dataclasses import dataclass
from functools import reduce
from itertools import product
import numpy as np
import pandas as pd

from backend.config import CPTP_TOL, MLE_MAX_ITER
from backend.errors import NumericalError, ValidationError
from data.random_streams import stream
from tomography.pauli import (
    apply_ptm,
    choi_min_eigenvalue,
    choi_to_ptm,
    pauli_labels,
    pauli_vector,
    ptm_to_choi,
)
from tomography.qst import (
    COUNT_COLUMNS,
    basis_probabilities,
    check_counts,
    measurement_projector,
    outcome_labels,
    product_bases,
)

_KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
_KET_PLUS_I = np.array([1, 1j], dtype=complex) / np.sqrt(2)

# informationally complete single-qubit preparations
PREP_STATES = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": _KET_PLUS,
    "+i": _KET_PLUS_I,
}


@dataclass(frozen=True)
class ProcessEstimate:
    ptm: np.ndarray
    ptm_unconstrained: np.ndarray
    residual_ls: float
    residual_cptp: float
    iterations: int
    choi_min_eigenvalue: float


def prep_density_matrix(label):
    """Density matrix of a preparation label; multi-qubit labels join single-qubit ones with ','."""
    try:
        kets = [PREP_STATES[part] for part in str(label).split(",")]
    except KeyError:
        raise ValidationError(f"Unknown preparation '{label}'", [f"prep: use {sorted(PREP_STATES)}"])
    v = reduce(np.kron, kets)
    return np.outer(v, v.conj())


def prep_labels(n_qubits=1):
    return [",".join(p) for p in product(PREP_STATES, repeat=n_qubits)]


def process_counts(ptm, shots, seed=0, preps=None, bases=None, exact=False):
    """Synthetic process-tomography counts for a channel given by its PTM."""
    R = np.asarray(ptm, dtype=float)
    n = int(round(np.log2(np.sqrt(R.shape[0]))))
    preps = preps or prep_labels(n)
    bases = bases or product_bases(n)
    rows = []
    for prep in preps:
        rho_out = apply_ptm(R, prep_density_matrix(prep))
        for basis in bases:
            p = basis_probabilities(rho_out, basis)
            p = p / p.sum()
            counts = shots * p if exact else stream(seed, "qpt", prep, basis).multinomial(int(shots), p)
            rows += [{"prep": prep, "basis": basis, "outcome": o, "count": c}
                     for o, c in zip(outcome_labels(n), counts)]
    return pd.DataFrame(rows, columns=COUNT_COLUMNS)


def _design(counts, n_qubits):
    """Rows map vec(R) (row-major) onto outcome frequencies."""
    d = 2 ** n_qubits
    pauli_out = {}
    rows, freqs = [], []
    totals = counts.groupby(["prep", "basis"])["count"].transform("sum").to_numpy(dtype=float)
    if np.any(totals <= 0):
        raise ValidationError("Every (prep, basis) setting needs at least one count")
    for (prep, basis, outcome), f in zip(counts[["prep", "basis", "outcome"]].itertuples(index=False),
                                         counts["count"].to_numpy(dtype=float) / totals):
        key = (basis, outcome)
        if key not in pauli_out:
            pauli_out[key] = pauli_vector(measurement_projector(basis, outcome)) / d
        x = pauli_vector(prep_density_matrix(prep))
        rows.append(np.outer(pauli_out[key], x).reshape(-1))
        freqs.append(f)
    return np.array(rows), np.array(freqs)


def _partial_trace_out(J, d):
    return np.einsum("ajbj->ab", J.reshape(d, d, d, d))


def project_tp(J, d):
    """Orthogonal projection of a Choi matrix onto tr_out J = I."""
    return J - np.kron(_partial_trace_out(J, d) - np.eye(d), np.eye(d)) / d


def project_psd(J):
    J = (J + J.conj().T) / 2
    w, V = np.linalg.eigh(J)
    return (V * np.clip(w, 0.0, None)) @ V.conj().T


def project_cptp(J, tol=CPTP_TOL, max_iter=MLE_MAX_ITER):
    """
    Closest CPTP Choi matrix by Dykstra's alternating projections.

    The last iterate is projected onto the TP subspace and, if that leaves a
    negative eigenvalue, mixed with the fully depolarizing Choi matrix just
    enough to restore positivity, so the output is exactly CPTP.

    Returns:
        (Choi matrix, iterations)
    """
    J = np.asarray(J, dtype=complex)
    d = int(round(np.sqrt(J.shape[0])))
    x = J.copy()
    p = np.zeros_like(J)
    q = np.zeros_like(J)
    for it in range(1, max_iter + 1):
        y = project_tp(x + p, d)
        p = x + p - y
        x_new = project_psd(y + q)
        q = y + q - x_new
        change = np.linalg.norm(x_new - x)
        x = x_new
        if change < tol:
            break
    else:
        logging.warning(f"CPTP projection stopped at max_iter={max_iter} with change {change:.3g}")

    x = project_tp(x, d)
    lam = choi_min_eigenvalue(x)
    if lam < 0:
        t = -lam / (1.0 / d - lam)
        x = (1 - t) * x + t * np.eye(d * d) / d
    return x, it


def qpt_ptm(counts, n_qubits=1):
    """
    Pauli transfer matrix from process-tomography counts.

    Unconstrained least squares on vec(R), then projection of the Choi matrix
    onto the CPTP set. Residuals are Frobenius norms of the frequency misfit.

    Raises:
        NumericalError: If the design misses PTM directions (listed in the message)
    """
    counts = check_counts(counts)
    if "prep" not in counts.columns:
        raise ValidationError("Process counts need a prep column")
    d = 2 ** n_qubits
    A, f = _design(counts, n_qubits)
    labels = pauli_labels(n_qubits)
    null = np.eye(A.shape[1]) - np.linalg.pinv(A) @ A
    missing = [f"R[{labels[k // (d * d)]},{labels[k % (d * d)]}]"
               for k in range(A.shape[1]) if np.linalg.norm(null[:, k]) > 1e-9]
    if missing:
        raise NumericalError(f"Process tomography design is rank deficient; missing directions {missing}")

    vec, *_ = np.linalg.lstsq(A, f, rcond=None)
    R_ls = vec.reshape(d * d, d * d)
    J, iterations = project_cptp(ptm_to_choi(R_ls))
    R = choi_to_ptm(J)
    R[0] = 0.0
    R[0, 0] = 1.0
    residual_ls = float(np.linalg.norm(A @ R_ls.reshape(-1) - f))
    residual_cptp = float(np.linalg.norm(A @ R.reshape(-1) - f))
    lam = choi_min_eigenvalue(ptm_to_choi(R))
    logging.info(
        f"QPT: qubits={n_qubits} | residual_ls={residual_ls:.3g} | residual_cptp={residual_cptp:.3g} | "
        f"projection_iterations={iterations} | min_choi_eig={lam:.3g}"
    )
    return ProcessEstimate(R, R_ls, residual_ls, residual_cptp, iterations, lam)
