# benchmarking/clifford.py

import logging
from collections import deque
from dataclasses import dataclass
import numpy as np

from backend.errors import ValidationError
from data.random_streams import as_generator
from tomography.pauli import pauli_basis

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j])
X90 = np.array([[1, -1j], [-1j, 1]], dtype=complex) / np.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
I2 = np.eye(2, dtype=complex)

# (x, z) bits of I, X, Y, Z
PAULI_BITS = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.int64)

CLASS_NAMES = ("local", "cnot_like", "iswap_like", "swap_like")
CZ_COUNT = {"local": 0, "cnot_like": 1, "iswap_like": 2, "swap_like": 3}
# single-qubit Clifford layers in the standard template of each class
SINGLE_QUBIT_LAYERS = {"local": 2, "cnot_like": 4, "iswap_like": 6, "swap_like": 6}

_groups = {}


@dataclass(frozen=True)
class CliffordElement:
    index: int
    n_qubits: int
    unitary: np.ndarray
    symplectic: np.ndarray
    clifford_class: str


def _generator_indices(n_qubits):
    # X and Z on each qubit
    if n_qubits == 1:
        return np.array([1, 3])
    return np.array([4, 12, 1, 3])


def _generators(n_qubits):
    if n_qubits == 1:
        return np.array([H, S])
    return np.array([np.kron(H, I2), np.kron(S, I2), np.kron(I2, H), np.kron(I2, S), CZ])


def pauli_images(U, n_qubits):
    """
    Integer Pauli coefficients of U G U^dag for the X and Z generators G.

    Returns:
        int8 array of shape (m, 2n, 4**n); each row holds a single +-1
    """
    U = np.asarray(U, dtype=complex)
    if U.ndim == 2:
        U = U[None]
    P = pauli_basis(n_qubits)
    G = P[_generator_indices(n_qubits)]
    d = U.shape[-1]
    conj = U[:, None] @ G[None] @ U.conj().swapaxes(-1, -2)[:, None]
    coef = np.einsum("kij,mgji->mgk", P, conj).real / d
    return np.rint(coef).astype(np.int8)


def _canonical(U):
    flat = U.reshape(-1)
    a = flat[np.flatnonzero(np.abs(flat) > 1e-6)[0]]
    return U * (np.conj(a) / abs(a))


def symplectic_from_images(images, n_qubits):
    """Binary symplectic matrix whose columns are the images of X1, Z1, X2, Z2."""
    cols = []
    for row in images:
        k = int(np.flatnonzero(row)[0])
        digits = [(k // 4 ** (n_qubits - 1 - q)) % 4 for q in range(n_qubits)]
        cols.append(np.concatenate([PAULI_BITS[dg] for dg in digits]))
    return np.array(cols, dtype=np.int64).T


def symplectic_form(n_qubits):
    return np.kron(np.eye(n_qubits, dtype=np.int64), np.array([[0, 1], [1, 0]], dtype=np.int64))


def is_symplectic(Sm):
    n = Sm.shape[0] // 2
    omega = symplectic_form(n)
    return bool(np.array_equal((Sm.T @ omega @ Sm) % 2, omega))


def _gf2_rank(M):
    M = M.copy() % 2
    rank = 0
    rows, cols = M.shape
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if M[r, c]), None)
        if pivot is None:
            continue
        M[[rank, pivot]] = M[[pivot, rank]]
        for r in range(rows):
            if r != rank and M[r, c]:
                M[r] = (M[r] + M[rank]) % 2
        rank += 1
    return rank


def classify(Sm):
    """Class of a two-qubit Clifford from the blocks of its symplectic matrix."""
    if Sm.shape[0] == 2:
        return "local"
    cross = _gf2_rank(Sm[0:2, 2:4])
    if cross == 0:
        return "local"
    if cross == 1:
        return "cnot_like"
    return "swap_like" if not Sm[0:2, 0:2].any() else "iswap_like"


class CliffordGroup:
    """
    Clifford group on one or two qubits, enumerated by breadth-first search
    from its generators. Elements are identified by how they map the Pauli
    X and Z generators, which fixes the unitary up to a global phase.
    """

    def __init__(self, n_qubits):
        if n_qubits not in (1, 2):
            raise ValidationError(f"Clifford groups are built for 1 or 2 qubits, got {n_qubits}")
        self.n_qubits = n_qubits
        self.dim = 2 ** n_qubits
        gens = _generators(n_qubits)

        identity = np.eye(self.dim, dtype=complex)[None]
        elements = [identity[0]]
        self._index = {pauli_images(identity, n_qubits)[0].tobytes(): 0}
        frontier = identity
        while frontier.shape[0]:
            candidates = (gens[:, None] @ frontier[None]).reshape(-1, self.dim, self.dim)
            fresh = []
            for U, img in zip(candidates, pauli_images(candidates, n_qubits)):
                key = img.tobytes()
                if key not in self._index:
                    self._index[key] = len(elements)
                    elements.append(U)
                    fresh.append(U)
            frontier = np.array(fresh) if fresh else np.empty((0, self.dim, self.dim), dtype=complex)

        self.unitaries = np.array([_canonical(U) for U in elements])
        images = pauli_images(self.unitaries, n_qubits)
        self.symplectic = np.array([symplectic_from_images(img, n_qubits) for img in images])
        self.classes = np.array([classify(Sm) for Sm in self.symplectic])
        self._inverse = None
        logging.info(f"Built {n_qubits}-qubit Clifford group with {len(elements)} elements")

    def __len__(self):
        return self.unitaries.shape[0]

    def index_of(self, U):
        key = pauli_images(U, self.n_qubits)[0].tobytes()
        try:
            return self._index[key]
        except KeyError:
            raise ValidationError("Operator is not a Clifford of this group")

    def compose(self, i, j):
        """Index of U_i U_j (U_j applied first)."""
        return self.index_of(self.unitaries[i] @ self.unitaries[j])

    def inverse(self, i):
        if self._inverse is None:
            self._inverse = np.array([self.index_of(U.conj().T) for U in self.unitaries])
        return int(self._inverse[i])

    def element(self, i):
        return CliffordElement(int(i), self.n_qubits, self.unitaries[i], self.symplectic[i], str(self.classes[i]))

    def sample(self, rng, size=None):
        return rng.integers(0, len(self), size=size)


def get_clifford_group(n_qubits):
    if n_qubits not in _groups:
        _groups[n_qubits] = CliffordGroup(n_qubits)
    return _groups[n_qubits]


def single_qubit_clifford_group():
    return get_clifford_group(1)


def two_qubit_clifford_group():
    return get_clifford_group(2)


def two_qubit_clifford_sampler(seed, index=0):
    """Uniformly drawn two-qubit Clifford; (seed, index) fixes the draw."""
    group = two_qubit_clifford_group()
    rng = as_generator(seed, "clifford2", index)
    return group.element(int(group.sample(rng)))


def class_sizes():
    classes = two_qubit_clifford_group().classes
    return {name: int(np.sum(classes == name)) for name in CLASS_NAMES}


def x90_counts():
    """
    Fewest X90 pulses per single-qubit Clifford when Z rotations are virtual.

    Breadth-first search over the group with free S and unit-cost X90.
    """
    group = single_qubit_clifford_group()
    cost = np.full(len(group), np.inf)
    cost[0] = 0
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for gate, step in ((S, 0), (X90, 1)):
            j = group.index_of(gate @ group.unitaries[i])
            if cost[i] + step < cost[j]:
                cost[j] = cost[i] + step
                if step == 0:
                    queue.appendleft(j)
                else:
                    queue.append(j)
    return cost.astype(int)


def native_gate_counts():
    """Average CZ and single-qubit gate counts per two-qubit Clifford in the native set."""
    sizes = class_sizes()
    total = sum(sizes.values())
    cz = sum(CZ_COUNT[k] * n for k, n in sizes.items()) / total
    layers = sum(SINGLE_QUBIT_LAYERS[k] * n for k, n in sizes.items()) / total
    x90 = float(x90_counts().mean())
    return {
        "cz_per_clifford": float(cz),
        "single_qubit_cliffords_per_clifford": float(layers),
        "x90_per_single_qubit_clifford": x90,
        "single_qubit_pulses_per_clifford": float(layers * x90),
        "class_sizes": sizes,
    }
