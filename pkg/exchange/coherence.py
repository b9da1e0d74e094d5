# exchange/coherence.py

from dataclasses import dataclass
import numpy as np

from backend.errors import ConfigurationError, ValidationError
from data.io import read_csv
from exchange.models import check_hull, monotone_interpolant

COHERENCE_FIXTURE = "data/fixtures/coherence_vs_cycle.csv"

# qubit | state of the other qubit -> fixture column
COLUMNS = {
    "Q2|Q5=0": "T2star_Q2_Q5dn_us",
    "Q2|Q5=1": "T2star_Q2_Q5up_us",
    "Q5|Q2=0": "T2star_Q5_Q2dn_us",
    "Q5|Q2=1": "T2star_Q5_Q2up_us",
}

_default_table = None


@dataclass(frozen=True)
class CoherenceTable:
    """T2* in microseconds at sampled conveyor cycles, one trajectory per conditional qubit state."""
    c: tuple
    t2_us: dict

    def __post_init__(self):
        errors = [f"{k}: unknown trajectory" for k in self.t2_us if k not in COLUMNS]
        for k, v in self.t2_us.items():
            if np.any(np.asarray(v) <= 0):
                errors.append(f"{k}: T2* must be > 0")
        if errors:
            raise ValidationError("Invalid coherence table", errors)
        interps = {k: monotone_interpolant(self.c, v, k) for k, v in self.t2_us.items()}
        object.__setattr__(self, "_interps", interps)

    @classmethod
    def from_frame(cls, df):
        df = df.sort_values("c")
        return cls(tuple(df["c"].astype(float)),
                   {k: tuple(df[col].astype(float)) for k, col in COLUMNS.items()})

    @classmethod
    def from_fixture(cls, path=COHERENCE_FIXTURE):
        return cls.from_frame(read_csv(path, required_cols=["c", *COLUMNS.values()]))


def get_default_table():
    global _default_table
    if _default_table is None:
        _default_table = CoherenceTable.from_fixture()
    return _default_table


def t2_at_cycle(table, c, which):
    """
    T2* (us) of one trajectory at cycle c, monotone-interpolated between knots.

    Raises:
        RangeError: If c lies outside the table
        ConfigurationError: If `which` names no trajectory of the table
    """
    if which not in table._interps:
        raise ConfigurationError(f"Unknown coherence trajectory: {which}")
    q = check_hull(table.c, c)
    t2 = table._interps[which](q)
    return float(t2) if np.ndim(t2) == 0 else t2
