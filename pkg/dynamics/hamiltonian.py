# dynamics/hamiltonian.py

from dataclasses import dataclass
import numpy as np

from backend.config import DELTA_EZ_HZ

# Spin basis |dd>, |ud>, |du>, |uu>; the first spin is Q2, the second Q5.
BASIS = ("dd", "ud", "du", "uu")

# Reorders spin-basis indices into the big-endian computational basis
# |00>, |01>, |10>, |11> (|0> = down, first qubit most significant). Self-inverse.
SPIN_TO_COMPUTATIONAL = np.array([0, 2, 1, 3])

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TwoSpinHamiltonianParams:
    delta_ez_Hz: float = DELTA_EZ_HZ
    J_Hz: float = 0.0


def hamiltonian(p):
    """
    Heisenberg two-spin Hamiltonian in rad/s.

    H = dEz/2 (s1z - s2z) + J (s1.s2)/4 written in the spin basis; the
    |ud> <-> |du> flip-flop element is J/2.
    """
    J, dez = p.J_Hz, p.delta_ez_Hz
    h = np.zeros((4, 4), dtype=complex)
    h[0, 0] = J / 4
    h[1, 1] = -J / 4 + dez
    h[2, 2] = -J / 4 - dez
    h[3, 3] = J / 4
    h[1, 2] = h[2, 1] = J / 2
    return TWO_PI * h


def hamiltonian_eigenvalues(p):
    return np.linalg.eigvalsh(hamiltonian(p))


def to_computational(U):
    """Reorder a spin-basis operator into the computational basis (and back)."""
    idx = SPIN_TO_COMPUTATIONAL
    return np.asarray(U)[np.ix_(idx, idx)]


def exchange_propagators(J_Hz, delta_ez_Hz, dt_ns):
    """
    Closed-form exp(-i H dt) for arrays of constant (J, dEz, dt).

    The outer states only pick up the J/4 phase; the |ud>,|du> block is an
    SU(2) rotation about (J/2, 0, dEz) times the -J/4 phase.

    Returns:
        Array of shape (n, 4, 4)
    """
    J = np.atleast_1d(np.asarray(J_Hz, dtype=float))
    dez = np.broadcast_to(np.asarray(delta_ez_Hz, dtype=float), J.shape)
    dt = np.broadcast_to(np.asarray(dt_ns, dtype=float) * 1e-9, J.shape)

    omega = np.sqrt(dez ** 2 + (J / 2) ** 2)
    cos = np.cos(TWO_PI * omega * dt)
    sin_over = TWO_PI * dt * np.sinc(2.0 * omega * dt)   # sin(2 pi omega dt) / omega
    outer = np.exp(-1j * np.pi * J * dt / 2)
    inner = np.conj(outer)

    U = np.zeros(J.shape + (4, 4), dtype=complex)
    U[:, 0, 0] = outer
    U[:, 3, 3] = outer
    U[:, 1, 1] = inner * (cos - 1j * sin_over * dez)
    U[:, 2, 2] = inner * (cos + 1j * sin_over * dez)
    U[:, 1, 2] = U[:, 2, 1] = inner * (-1j * sin_over * J / 2)
    return U


def rx(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def on_spin(op, spin):
    """Embed a single-spin operator on spin 1 (Q2) or 2 (Q5) of the spin basis."""
    eye = np.eye(2, dtype=complex)
    # spin-basis index = s1 + 2 s2, so spin 1 is the fast kron factor
    return np.kron(eye, op) if spin == 1 else np.kron(op, eye)
