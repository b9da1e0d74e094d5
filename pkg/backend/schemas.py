# backend/schemas.py

from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    field_validator,
    model_validator,
)
from pydantic import ValidationError as PydanticValidationError

from backend.config import (
    BELL_PREP_DEPOLARIZING,
    B3_EXCHANGE_SCALE_MV,
    B3_REFERENCE_MV,
    CALIBRATION_GATE_TIME_NS,
    CONFUSION_MATRIX,
    DELTA_EZ_HZ,
    LOCAL_CZ_DEPOLARIZING,
    PARITY_ERROR,
    RB_LENGTHS,
    RB_SEQUENCES,
    RB_SHOTS,
    SEQUENCE_KEEP,
    T_MEASURE_IRB_S,
    T_MEASURE_T2_S,
    TELEPORT_SHOTS,
)
from backend.errors import ConfigurationError, ValidationError
from readout.confusion import ConfusionMatrix
from readout.initialization import keep_fraction_expected


def _grid(start, stop, n):
    return [round(float(v), 6) for v in np.linspace(start, stop, n)]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class VoltageRow(StrictModel):
    gate: str
    center_nm: float
    amplitude_mV: float
    dc_offset_mV: float
    phase_f: Optional[float] = None
    phase_f2: Optional[float] = None


class StageConfig(StrictModel):
    label: Optional[str] = None
    duration_ns: PositiveFloat
    c_start: float
    c_end: float
    frequency_MHz: NonNegativeFloat = 0.0
    j_MHz: Optional[NonNegativeFloat] = None


class DriveConfig(StrictModel):
    """Conveyor drive: a shipped table or an included CSV (`voltage_table`)."""
    table: str = "table1"
    voltage_table: Optional[List[VoltageRow]] = None
    cycle_origin: float = 0.0
    v_b3_mV: Optional[float] = None
    ac_only: bool = False
    frequency_MHz: PositiveFloat = 10.0
    cycles: List[NonNegativeFloat] = Field(default_factory=lambda: _grid(0.0, 1.0, 21), min_length=1)


class PotentialSweepConfig(DriveConfig):
    x_step_nm: Optional[PositiveFloat] = None


class EdsrVsCycleConfig(DriveConfig):
    ac_only: bool = True
    cycles: List[NonNegativeFloat] = Field(default_factory=lambda: _grid(0.0, 0.8, 33), min_length=2)


class JVsCycleConfig(StrictModel):
    cycles: List[NonNegativeFloat] = Field(default_factory=lambda: _grid(0.0, 1.0, 21), min_length=1)
    b3_fixture: str = "data/fixtures/exchange_vs_b3.csv"
    saturation_fixture: str = "data/fixtures/exchange_saturation.csv"


class DCPhaseMapConfig(StrictModel):
    cycles: List[NonNegativeFloat] = Field(default_factory=lambda: [0.6, 0.7, 0.8, 0.9], min_length=1)
    wait_max_ns: PositiveFloat = 1000.0
    wait_step_ns: PositiveFloat = 5.0
    other_state: Literal[0, 1] = 0
    delta_ez_MHz: float = DELTA_EZ_HZ / 1e6
    extract_exchange: bool = True

    @model_validator(mode="after")
    def _enough_points(self):
        if self.wait_max_ns / self.wait_step_ns < 4:
            raise ValueError("wait_max_ns must span at least five wait steps")
        return self


class CzBudgetConfig(StrictModel):
    delta_ez_MHz: float = DELTA_EZ_HZ / 1e6
    t_m_from_s: PositiveFloat = T_MEASURE_T2_S
    t_m_to_s: PositiveFloat = T_MEASURE_IRB_S
    stages: Optional[List[StageConfig]] = None


class BootstrapConfig(StrictModel):
    bootstrap_resamples: int = Field(0, ge=0)

    @field_validator("bootstrap_resamples")
    @classmethod
    def _zero_or_enough(cls, value):
        if value and value < 100:
            raise ValueError("use 0 to skip the bootstrap or at least 100 resamples")
        return value


class RbConfig(BootstrapConfig):
    lengths: List[PositiveInt] = Field(default_factory=lambda: list(RB_LENGTHS), min_length=3)
    sequences_per_length: PositiveInt = RB_SEQUENCES
    shots: PositiveInt = RB_SHOTS
    keep_fraction: float = Field(default_factory=lambda: keep_fraction_expected(PARITY_ERROR, SEQUENCE_KEEP),
                                 gt=0.0, le=1.0)
    depolarizing_p: float = Field(0.8024, ge=0.0, le=1.0)
    runs: PositiveInt = 1
    simultaneous: bool = False
    single_qubit_p: Dict[str, float] = Field(default_factory=lambda: {"Q2": 0.9806, "Q5": 0.9902})

    @field_validator("single_qubit_p")
    @classmethod
    def _probabilities(cls, value):
        bad = [k for k, p in value.items() if not 0.0 <= float(p) <= 1.0]
        if bad:
            raise ValueError(f"decay parameters outside [0, 1] for {bad}")
        return value


class IrbConfig(BootstrapConfig):
    lengths: List[PositiveInt] = Field(default_factory=lambda: [1, 2, 3, 4, 6, 8, 12, 16, 24, 32], min_length=3)
    sequences_per_length: PositiveInt = RB_SEQUENCES
    shots: PositiveInt = RB_SHOTS
    keep_fraction: float = Field(default_factory=lambda: keep_fraction_expected(PARITY_ERROR, SEQUENCE_KEEP),
                                 gt=0.0, le=1.0)
    depolarizing_p: float = Field(0.8024, ge=0.0, le=1.0)
    cz_phase_error_rad: float = 0.2766


class CzCalibrationConfig(StrictModel):
    b3_offsets_mV: List[float] = Field(default_factory=lambda: _grid(8.0, 11.0, 7), min_length=3)
    gate_time_ns: PositiveFloat = CALIBRATION_GATE_TIME_NS
    heating_shift_rad: float = 0.0
    reference_mV: float = B3_REFERENCE_MV
    scale_mV: PositiveFloat = B3_EXCHANGE_SCALE_MV


class TeleportNoiseConfig(StrictModel):
    bell_prep_depolarizing: float = Field(BELL_PREP_DEPOLARIZING, ge=0.0, le=1.0)
    local_cz_depolarizing: float = Field(LOCAL_CZ_DEPOLARIZING, ge=0.0, le=1.0)
    parity_error: float = Field(PARITY_ERROR, ge=0.0, le=1.0)
    confusion: List[List[float]] = Field(default_factory=lambda: [list(r) for r in CONFUSION_MATRIX])
    idle_dephasing: float = Field(0.0, ge=0.0, le=1.0)
    local_cz_phase_error_rad: float = 0.0
    dephase_odd: bool = True
    shuttled_bell_cz: bool = True

    @field_validator("confusion")
    @classmethod
    def _column_stochastic(cls, value):
        ConfusionMatrix(value)
        return value


class TeleportRabiConfig(StrictModel):
    angles_rad: List[float] = Field(default_factory=lambda: _grid(0.0, 2 * np.pi, 17), min_length=1)
    shots: PositiveInt = TELEPORT_SHOTS
    noise: TeleportNoiseConfig = Field(default_factory=TeleportNoiseConfig)


class TeleportPhaseMapConfig(StrictModel):
    theta1_rad: List[float] = Field(default_factory=lambda: _grid(0.0, 2 * np.pi, 9), min_length=1)
    theta2_rad: List[float] = Field(default_factory=lambda: _grid(0.0, 2 * np.pi, 9), min_length=1)
    shots: PositiveInt = TELEPORT_SHOTS
    branch: Literal["Psi+", "Phi-"] = "Psi+"
    noise: TeleportNoiseConfig = Field(default_factory=TeleportNoiseConfig)


class TeleportQptConfig(BootstrapConfig):
    shots: PositiveInt = TELEPORT_SHOTS
    branch: Literal["Psi+", "Phi-"] = "Psi+"
    spam_correct: bool = True
    runs: PositiveInt = 4
    bell_shots: PositiveInt = 1000
    ordering_check: bool = True
    ordering_shots: PositiveInt = 10000
    noise: TeleportNoiseConfig = Field(default_factory=TeleportNoiseConfig)


CONFIG_MODELS = {
    "potential-sweep": PotentialSweepConfig,
    "j-vs-cycle": JVsCycleConfig,
    "dcphase-map": DCPhaseMapConfig,
    "cz-fidelity-budget": CzBudgetConfig,
    "rb": RbConfig,
    "irb": IrbConfig,
    "cz-calibration": CzCalibrationConfig,
    "teleport-rabi": TeleportRabiConfig,
    "teleport-phase-map": TeleportPhaseMapConfig,
    "teleport-qpt": TeleportQptConfig,
    "edsr-vs-cycle": EdsrVsCycleConfig,
}


def field_messages(err):
    """One `field.path: message` string per pydantic error."""
    out = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        out.append(f"{path}: {e['msg']}")
    return out


def validate_config(name, doc=None):
    """
    Validate a scenario config document and fill in defaults.

    A top-level `scenario:` key, when present, must match `name`.

    Raises:
        ConfigurationError: Unknown scenario or mismatching scenario key
        ValidationError: One message per offending field
    """
    if name not in CONFIG_MODELS:
        raise ConfigurationError(f"Unknown scenario: {name}")
    doc = dict(doc or {})
    declared = doc.pop("scenario", name)
    if declared != name:
        raise ConfigurationError(f"Config is for scenario '{declared}', not '{name}'")
    try:
        return CONFIG_MODELS[name].model_validate(doc)
    except PydanticValidationError as e:
        raise ValidationError(f"Invalid {name} config", field_messages(e)) from None
