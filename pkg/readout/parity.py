# readout/parity.py

import logging
from dataclasses import dataclass
from functools import reduce
import numpy as np
import pandas as pd

from backend.config import PARITY_ERROR
from backend.errors import ValidationError
from data.random_streams import as_generator, stream

OUTCOMES = ("even", "odd")
SHOT_COLUMNS = ["shot_id", "pair", "outcome", "kept"]

_Z = np.diag([1.0, -1.0]).astype(complex)


def _bits(n_qubits):
    idx = np.arange(2 ** n_qubits)
    return (idx[:, None] >> np.arange(n_qubits - 1, -1, -1)[None, :]) & 1


def as_density_matrix(state):
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        state = np.outer(state, state.conj())
    if state.ndim != 2 or state.shape[0] != state.shape[1]:
        raise ValidationError("State must be a ket or a square density matrix", [f"shape: {state.shape}"])
    tr = np.trace(state).real
    if abs(tr - 1.0) > 1e-9:
        raise ValidationError("State must be normalized", [f"trace: {tr:.6g}"])
    return state


@dataclass(frozen=True)
class ParityChannel:
    """
    Spin-blockade parity readout of one qubit pair in an n-qubit register.

    Qubits are indexed big-endian (qubit 0 is the most significant bit).
    Parallel spins read even. With `dephase_odd` set, an odd outcome fully
    dephases the pair in the {|01>, |10>} basis (singlet-triplet mixing).
    """

    pair: tuple = (0, 1)
    n_qubits: int = 2
    dephase_odd: bool = True
    label: str = ""

    def __post_init__(self):
        a, b = self.pair
        if a == b or not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
            raise ValidationError("Parity pair must be two distinct qubits of the register",
                                  [f"pair: {self.pair}", f"n_qubits: {self.n_qubits}"])

    @property
    def dim(self):
        return 2 ** self.n_qubits

    def _pair_bits(self):
        bits = _bits(self.n_qubits)
        return bits[:, self.pair[0]], bits[:, self.pair[1]]

    def projectors(self):
        """Diagonals of the even projector and of the |01>, |10> pair projectors."""
        a, b = self._pair_bits()
        even = (a == b).astype(float)
        return even, ((a == 0) & (b == 1)).astype(float), ((a == 1) & (b == 0)).astype(float)

    def kraus(self, outcome=None):
        even, p01, p10 = self.projectors()
        odd = [np.diag(p01), np.diag(p10)] if self.dephase_odd else [np.diag(p01 + p10)]
        if outcome == "even":
            return [np.diag(even)]
        if outcome == "odd":
            return odd
        if outcome is not None:
            raise ValidationError(f"Unknown parity outcome '{outcome}'")
        return [np.diag(even)] + odd

    def probabilities(self, rho):
        even, _, _ = self.projectors()
        p_even = float(np.clip(np.real(np.diag(rho)) @ even, 0.0, 1.0))
        return {"even": p_even, "odd": 1.0 - p_even}

    def branch(self, rho, outcome):
        """Unnormalized post-measurement state for one outcome."""
        return sum(K @ rho @ K.conj().T for K in self.kraus(outcome))

    def apply(self, rho):
        """Outcome-averaged channel."""
        return self.branch(rho, "even") + self.branch(rho, "odd")


def parity_kraus(pair=(0, 1), n_qubits=2, dephase_odd=True):
    return ParityChannel(tuple(pair), n_qubits, dephase_odd).kraus()


def parity_measure(state, channel, seed=0):
    """
    Projective parity measurement of one shot.

    Returns:
        (outcome, normalized post-measurement density matrix)
    """
    rho = as_density_matrix(state)
    if rho.shape[0] != channel.dim:
        raise ValidationError("State dimension does not match the parity channel",
                              [f"state: {rho.shape[0]}", f"channel: {channel.dim}"])
    rng = as_generator(seed, "parity-measure")
    probs = channel.probabilities(rho)
    outcome = "even" if rng.random() < probs["even"] else "odd"
    post = channel.branch(rho, outcome)
    return outcome, post / np.trace(post).real


def idle_dephasing(rho, qubits, p, n_qubits):
    """Z-dephasing with probability p on each listed qubit."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError("Dephasing probability must lie in [0, 1]", [f"p: {p}"])
    if p == 0.0:
        return rho
    for q in qubits:
        Zq = reduce(np.kron, [_Z if k == q else np.eye(2) for k in range(n_qubits)])
        rho = (1.0 - p) * rho + p * (Zq @ rho @ Zq)
    return rho


def flip_outcomes(outcomes, error, rng):
    """Report each parity outcome flipped with probability `error`."""
    outcomes = np.asarray(outcomes)
    flip = rng.random(outcomes.shape) < error
    return np.where(flip, np.where(outcomes == "even", "odd", "even"), outcomes)


def sample_parity_outcomes(p_even, shots, seed=0, parity_error=PARITY_ERROR, key="parity"):
    """Reported parity outcomes of `shots` independent shots."""
    if shots < 0:
        raise ValidationError("Shot count must be non-negative", [f"shots: {shots}"])
    rng = stream(seed, key)
    true = np.where(rng.random(int(shots)) < p_even, "even", "odd")
    return flip_outcomes(true, parity_error, rng)


def shot_records(state, channel, shots, seed=0, parity_error=PARITY_ERROR, keep_fraction=1.0):
    """
    Shot table (shot_id, pair, outcome, kept) for repeated parity readout of a state.

    `kept` is a Bernoulli keep mask with probability keep_fraction.
    """
    rho = as_density_matrix(state)
    pair = channel.label or f"q{channel.pair[0]}q{channel.pair[1]}"
    p_even = channel.probabilities(rho)["even"]
    outcomes = sample_parity_outcomes(p_even, shots, seed, parity_error, key=f"shots-{pair}")
    kept = stream(seed, "keep", pair).random(int(shots)) < keep_fraction
    df = pd.DataFrame({"shot_id": np.arange(int(shots)), "pair": pair, "outcome": outcomes, "kept": kept})
    logging.info(f"Parity shots: pair={pair} | shots={shots} | even={np.mean(outcomes == 'even'):.4f} | kept={kept.mean():.4f}")
    return df[SHOT_COLUMNS]
