# teleport/lookup.py

import logging
from dataclasses import dataclass
import numpy as np

from backend.errors import ValidationError
from data.io import read_csv

BELL_LOOKUP = "data/fixtures/bell_lookup.csv"
LOOKUP_COLUMNS = ["parity_1", "parity_2", "bell_label", "feedforward"]
PARITIES = ("even", "odd")
RESOLVED = ("Psi+", "Phi-")

# ideal single-qubit PTMs of the feedforward Paulis, Pauli order (I, X, Y, Z)
FEEDFORWARD_PTM = {
    "X": np.diag([1.0, 1.0, -1.0, -1.0]),
    "Z": np.diag([1.0, -1.0, -1.0, 1.0]),
    "none": np.eye(4),
}

_lookup = None


@dataclass(frozen=True)
class BellOutcome:
    parity_1: str
    parity_2: str
    bell_label: str
    feedforward: str

    @property
    def resolved(self):
        return self.bell_label != "ambiguous"


def get_lookup_table():
    global _lookup
    if _lookup is None:
        df = read_csv(BELL_LOOKUP, required_cols=LOOKUP_COLUMNS)
        pairs = set(zip(df["parity_1"], df["parity_2"]))
        if pairs != {(a, b) for a in PARITIES for b in PARITIES}:
            raise ValidationError("Bell lookup must list every parity pair exactly once", [f"rows: {sorted(pairs)}"])
        _lookup = {(r.parity_1, r.parity_2): BellOutcome(r.parity_1, r.parity_2, r.bell_label, r.feedforward)
                   for r in df.itertuples(index=False)}
        logging.info(f"Loaded Bell lookup with {len(_lookup)} rows")
    return _lookup


def bell_lookup(parity_1, parity_2):
    """Bell outcome and feedforward for the two sequential parity readouts."""
    key = (str(parity_1), str(parity_2))
    bad = [f"parity: {p}" for p in key if p not in PARITIES]
    if bad:
        raise ValidationError("Parities must be 'even' or 'odd'", bad)
    return get_lookup_table()[key]


def branch_parities(bell_label):
    """(parity_1, parity_2) pairs that resolve to a Bell label."""
    return [k for k, v in get_lookup_table().items() if v.bell_label == bell_label]


def ideal_branch_ptm(bell_label):
    """PTM the ideal protocol realizes on a branch before feedforward."""
    rows = branch_parities(bell_label)
    if not rows or bell_label not in RESOLVED:
        raise ValidationError(f"Branch '{bell_label}' is not a resolved Bell outcome", [f"use one of {RESOLVED}"])
    return FEEDFORWARD_PTM[get_lookup_table()[rows[0]].feedforward]
