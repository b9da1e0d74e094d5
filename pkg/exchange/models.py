# exchange/models.py

from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator

from backend.errors import ConfigurationError, RangeError, ValidationError
from data.io import read_csv

EXCHANGE_FIXTURE = "data/fixtures/exchange_vs_cycle.csv"
VARIANTS = ("exponential", "table", "saturating")

_default_model = None


def j_exponential(v_b3, J_0, v_0):
    """J(v) = J_0 exp(v / v_0), with v and v_0 in mV."""
    if not v_0 > 0:
        raise ValidationError("Invalid exponential model", [f"v_0: must be > 0, got {v_0}"])
    return J_0 * np.exp(np.asarray(v_b3, dtype=float) / v_0)


def j_logistic(c, J_max, c_0, w):
    return J_max / (1.0 + np.exp(-(np.asarray(c, dtype=float) - c_0) / w))


def check_hull(knots, query, label="c"):
    q = np.asarray(query, dtype=float)
    lo, hi = float(knots[0]), float(knots[-1])
    if np.any(q < lo - 1e-12) or np.any(q > hi + 1e-12):
        raise RangeError(f"{label} outside sampled range [{lo}, {hi}]: {query}")
    return np.clip(q, lo, hi)


def monotone_interpolant(x, y, label):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 2:
        raise ValidationError("Invalid table", [f"{label}: need at least two matching knots"])
    if np.any(np.diff(x) <= 0):
        raise ValidationError("Invalid table", [f"{label}: knots must be strictly increasing"])
    return PchipInterpolator(x, y, extrapolate=False)


@dataclass(frozen=True)
class ExchangeModel:
    """
    Exchange coupling J in Hz.

    variant "table" interpolates (c, J) knots, "saturating" is a logistic in
    c and "exponential" is exponential in the barrier voltage offset.
    """
    variant: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"Unknown exchange model variant: {self.variant}")
        if self.variant == "table":
            c, j = self.params["c"], self.params["J_Hz"]
            if np.any(np.asarray(j) < 0):
                raise ValidationError("Invalid exchange table", ["J_Hz: must be >= 0"])
            object.__setattr__(self, "_interp", monotone_interpolant(c, j, "c"))
        elif self.variant == "saturating":
            if not (self.params["J_max"] >= 0 and self.params["w"] > 0):
                raise ValidationError("Invalid saturating model", ["J_max >= 0 and w > 0 required"])

    @classmethod
    def from_table(cls, c, J_Hz):
        return cls("table", {"c": tuple(float(x) for x in c), "J_Hz": tuple(float(x) for x in J_Hz)})

    @classmethod
    def from_fixture(cls, path=EXCHANGE_FIXTURE):
        df = read_csv(path, required_cols=["c", "J_Hz"]).sort_values("c")
        return cls.from_table(df["c"], df["J_Hz"])

    @classmethod
    def saturating(cls, J_max, c_0, w):
        return cls("saturating", {"J_max": float(J_max), "c_0": float(c_0), "w": float(w)})

    @classmethod
    def exponential(cls, J_0, v_0):
        return cls("exponential", {"J_0": float(J_0), "v_0": float(v_0)})

    @property
    def hull(self):
        if self.variant == "table":
            return self.params["c"][0], self.params["c"][-1]
        return -np.inf, np.inf

    def scaled(self, factor):
        """Same model with J multiplied by factor."""
        if self.variant == "table":
            return ExchangeModel.from_table(self.params["c"], np.asarray(self.params["J_Hz"]) * factor)
        if self.variant == "saturating":
            return ExchangeModel.saturating(self.params["J_max"] * factor, self.params["c_0"], self.params["w"])
        return ExchangeModel.exponential(self.params["J_0"] * factor, self.params["v_0"])


def get_default_model():
    global _default_model
    if _default_model is None:
        _default_model = ExchangeModel.from_fixture()
    return _default_model


def j_at_cycle(m, c):
    """
    Exchange at conveyor cycle c (scalar or array), clamped at zero.

    Raises:
        RangeError: If c lies outside the table hull
        ConfigurationError: For the voltage-parameterized variant
    """
    if m.variant == "table":
        q = check_hull(m.params["c"], c)
        j = np.maximum(m._interp(q), 0.0)
    elif m.variant == "saturating":
        j = j_logistic(c, m.params["J_max"], m.params["c_0"], m.params["w"])
    else:
        raise ConfigurationError("Exponential exchange model is parameterized by voltage, not cycle")
    return float(j) if np.ndim(j) == 0 else j


def j_at_voltage(m, v_b3):
    if m.variant != "exponential":
        raise ConfigurationError("Only the exponential exchange model is parameterized by voltage")
    return j_exponential(v_b3, m.params["J_0"], m.params["v_0"])


def j_versus_cycle(m, cycles):
    cycles = np.asarray(cycles, dtype=float)
    return pd.DataFrame({"c": cycles, "J_Hz": j_at_cycle(m, cycles)})
