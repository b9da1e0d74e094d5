# readout/initialization.py

import logging
from dataclasses import dataclass
import numpy as np
import pandas as pd

from backend.config import PARITY_ERROR, SEQUENCE_KEEP
from backend.errors import ValidationError
from data.random_streams import stream

# register order (Q1, Q2, Q5, Q6); readout pairs (Q1, Q2) and (Q5, Q6)
REGISTER = ("Q1", "Q2", "Q5", "Q6")
PAIRS = ("Q1Q2", "Q5Q6")
TARGET_BITS = (1, 0, 0, 0)


@dataclass(frozen=True)
class InitializationKnobs:
    parity_error: float = 0.0        # flip probability of each parity check
    feedback_error: float = 0.0      # feedback X fails to flip
    adiabatic_error: float = 0.0     # charge-state load lands in the swapped spin order
    p_even_initial: float = 0.5

    def __post_init__(self):
        bad = [f"{k}: {v}" for k, v in self.__dict__.items() if not 0.0 <= v <= 1.0]
        if bad:
            raise ValidationError("Initialization knobs must be probabilities", bad)


@dataclass(frozen=True)
class InitializationOutcome:
    state: np.ndarray
    kept: bool
    attempts: int


def _pair_sequence(rng, knobs):
    """One pair: parity check, feedback X, recheck; returns (kept, pair bits, feedback pulses)."""
    even = rng.random() < knobs.p_even_initial
    reported_even = even != (rng.random() < knobs.parity_error)
    pulses = 0
    if reported_even:
        pulses = 1
        if rng.random() >= knobs.feedback_error:
            even = not even
    reported_even = even != (rng.random() < knobs.parity_error)
    kept = not reported_even

    if even:
        bits = (1, 1) if rng.random() < 0.5 else (0, 0)
    elif rng.random() < knobs.adiabatic_error:
        bits = (0, 1)
    else:
        bits = (1, 0)
    return kept, bits, pulses


def initialize_sequence(seed=0, knobs=None, shot=0):
    """
    Feedback initialization of (Q1, Q2, Q5, Q6) into |1000>.

    Each pair is parity-checked; an even result triggers a feedback X on the
    mobile qubit, the parity is measured again and only odd results are kept.
    The adiabatic load maps odd pairs to (1, 0) and a final X on Q5 gives
    |1000>. `attempts` counts the feedback pulses applied.

    Returns:
        InitializationOutcome with the 16-dimensional ket, kept flag and attempts
    """
    knobs = knobs or InitializationKnobs()
    rng = stream(seed, "initialize", shot)
    kept_12, bits_12, pulses_12 = _pair_sequence(rng, knobs)
    kept_56, bits_56, pulses_56 = _pair_sequence(rng, knobs)
    q5, q6 = bits_56
    bits = (*bits_12, 1 - q5, q6)
    state = np.zeros(16, dtype=complex)
    state[int("".join(map(str, bits)), 2)] = 1.0
    return InitializationOutcome(state, bool(kept_12 and kept_56), pulses_12 + pulses_56)


def sample_initialization(shots, seed=0, knobs=None):
    """Shot table (shot_id, kept, correct, attempts) of repeated initialization."""
    rows = []
    target = int("".join(map(str, TARGET_BITS)), 2)
    for s in range(int(shots)):
        out = initialize_sequence(seed, knobs, shot=s)
        rows.append({"shot_id": s, "kept": out.kept, "correct": bool(abs(out.state[target]) > 0.5),
                     "attempts": out.attempts})
    df = pd.DataFrame(rows, columns=["shot_id", "kept", "correct", "attempts"])
    logging.info(f"Initialization: shots={shots} | kept={df['kept'].mean():.4f}")
    return df


def keep_fraction_expected(parity_error=PARITY_ERROR, sequence_keep=1.0, n_pairs=2):
    """
    Analytic fraction of shots surviving post-selection.

    A pair is kept when both checks are right or both are wrong:
    (1 - eps)^2 + eps^2 per pair, times the sequence-level keep fraction.
    """
    per_pair = (1.0 - parity_error) ** 2 + parity_error ** 2
    return float(per_pair ** n_pairs * sequence_keep)


def expected_kept_shots(shots, parity_error=PARITY_ERROR, sequence_keep=SEQUENCE_KEEP):
    return float(shots * keep_fraction_expected(parity_error, sequence_keep))
