# tomography/pauli.py

from functools import lru_cache, reduce
from itertools import product
import numpy as np

from backend.errors import ValidationError

PAULI_LABELS = ("I", "X", "Y", "Z")
PAULI_1Q = np.array([
    [[1, 0], [0, 1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


@lru_cache(maxsize=None)
def _basis(n_qubits):
    mats = [reduce(np.kron, (PAULI_1Q[i] for i in idx)) for idx in product(range(4), repeat=n_qubits)]
    out = np.array(mats)
    out.setflags(write=False)
    return out


def pauli_basis(n_qubits):
    """
    Unnormalized Pauli products, shape (4**n, 2**n, 2**n).

    Ordering is lexicographic in (I, X, Y, Z) with the first qubit the most
    significant digit, so index 4a + b is P_a (x) P_b for two qubits.
    """
    return _basis(int(n_qubits))


def pauli_labels(n_qubits):
    return ["".join(p) for p in product(PAULI_LABELS, repeat=n_qubits)]


def _n_qubits(dim):
    n = int(round(np.log2(dim)))
    if 2 ** n != dim:
        raise ValidationError(f"Dimension {dim} is not a power of two")
    return n


def pauli_vector(rho):
    """Expectation values tr(P_k rho)."""
    rho = np.asarray(rho, dtype=complex)
    P = pauli_basis(_n_qubits(rho.shape[0]))
    return np.einsum("kij,ji->k", P, rho).real


def state_from_pauli_vector(r):
    r = np.asarray(r, dtype=float)
    n = _n_qubits(int(round(np.sqrt(r.size))))
    d = 2 ** n
    return np.einsum("k,kij->ij", r, pauli_basis(n)) / d


def ptm_from_kraus(kraus):
    """Pauli transfer matrix R_ij = tr(P_i E(P_j)) / d of a Kraus map."""
    kraus = np.asarray(kraus, dtype=complex)
    if kraus.ndim == 2:
        kraus = kraus[None]
    d = kraus.shape[-1]
    P = pauli_basis(_n_qubits(d))
    images = np.einsum("mab,jbc,mdc->jad", kraus, P, kraus.conj())
    return np.einsum("iab,jba->ij", P, images).real / d


def ptm_from_unitary(U):
    return ptm_from_kraus(np.asarray(U, dtype=complex)[None])


def ptm_to_choi(R):
    """Choi matrix sum_ij |i><j| (x) E(|i><j|), trace d."""
    R = np.asarray(R, dtype=float)
    d = int(round(np.sqrt(R.shape[0])))
    P = pauli_basis(_n_qubits(d))
    J = np.einsum("lk,kba,lcd->acbd", R, P, P) / d
    return J.reshape(d * d, d * d)


def choi_to_ptm(J):
    J = np.asarray(J, dtype=complex)
    d = int(round(np.sqrt(J.shape[0])))
    P = pauli_basis(_n_qubits(d))
    J4 = J.reshape(d, d, d, d)
    return np.einsum("kba,lcd,acbd->lk", P.conj(), P.conj(), J4).real / d


def apply_ptm(R, rho):
    return state_from_pauli_vector(np.asarray(R) @ pauli_vector(rho))


def choi_min_eigenvalue(J):
    J = np.asarray(J, dtype=complex)
    return float(np.linalg.eigvalsh((J + J.conj().T) / 2).min())


def is_trace_preserving(R, tol=1e-9):
    R = np.asarray(R)
    first = np.zeros(R.shape[1])
    first[0] = 1.0
    return bool(np.max(np.abs(R[0] - first)) < tol)


def ptm_average_fidelity(R, R_ideal, d=None):
    """Average gate fidelity (tr(R_ideal^T R) / d + 1) / (d + 1) of two trace-preserving PTMs."""
    R = np.asarray(R, dtype=float)
    R_ideal = np.asarray(R_ideal, dtype=float)
    d = d or int(round(np.sqrt(R.shape[0])))
    return float((np.trace(R_ideal.T @ R) / d + 1.0) / (d + 1.0))
