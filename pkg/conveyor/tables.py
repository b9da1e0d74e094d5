# conveyor/tables.py

import os
import logging
import numpy as np

from backend.config import ELECTRODE_SPACING_NM, KERNEL_WIDTH_NM, LEVER_ARM_MEV_PER_MV
from backend.errors import ConfigurationError
from conveyor.potential import Gate, GateStack
from conveyor.waveform import GateWaveform
from data.io import read_csv, read_yaml

TABLE_COLUMNS = ["gate", "center_nm", "amplitude_mV", "dc_offset_mV", "phase_f", "phase_f2"]
TABLE_REGISTRY = "data/fixtures/voltage_tables.yaml"

_registry = None


def get_registry():
    global _registry
    if _registry is None:
        _registry = read_yaml(TABLE_REGISTRY)
    return _registry


def _phase(value):
    """Table phases are in units of 2*pi; blank means the tone is off."""
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return None
    return 2.0 * np.pi * float(value)


def stack_from_records(records, cycle_origin=0.0, v_b3_mV=None, b3_gate="B3",
                       ac_only=False, lever_arm=LEVER_ARM_MEV_PER_MV,
                       kernel_width_nm=KERNEL_WIDTH_NM):
    """
    Build a gate stack and waveform list from voltage-table rows.

    Args:
        records: Iterable of dicts with the table columns
        cycle_origin: Cycles between the phase reference and the loading point
        v_b3_mV: Replaces the DC offset of the b3_gate row when given
        ac_only: Drop all DC offsets

    Returns:
        (GateStack, list of GateWaveform)
    """
    records = list(records)
    if not records:
        raise ConfigurationError("Voltage table has no rows")
    missing = [col for col in TABLE_COLUMNS if col not in records[0]]
    if missing:
        raise ConfigurationError(f"Voltage table is missing columns: {missing}")

    gates, waveforms = [], []
    for row in records:
        gate_id = str(row["gate"])
        phase_f = _phase(row["phase_f"])
        phase_f2 = _phase(row["phase_f2"])
        tones = {tone for tone, ph in (("f", phase_f), ("f/2", phase_f2)) if ph is not None}
        dc = float(row["dc_offset_mV"])
        if v_b3_mV is not None and gate_id == b3_gate:
            dc = float(v_b3_mV)
        if ac_only:
            dc = 0.0
        gates.append(Gate(gate_id, float(row["center_nm"]), kernel_width_nm, lever_arm))
        waveforms.append(GateWaveform(gate_id, float(row["amplitude_mV"]), dc,
                                      phase_f or 0.0, phase_f2 or 0.0, frozenset(tones)))
    return GateStack(tuple(gates), cycle_origin=float(cycle_origin)), waveforms


def load_voltage_table(name, v_b3_mV=None, ac_only=False):
    """
    Load one of the shipped drive tables (table1, table2, table3) or a CSV path.

    Raises:
        FileNotFoundError: If the CSV does not exist
        ConfigurationError: If the table name is unknown or columns are missing
    """
    registry = get_registry()
    if name in registry:
        entry = registry[name]
        path = os.path.join("data", "fixtures", entry["file"])
        cycle_origin = entry.get("cycle_origin", 0.0)
        b3_gate = entry.get("b3_gate", "B3")
    elif str(name).endswith(".csv"):
        path, cycle_origin, b3_gate = name, 0.0, "B3"
    else:
        raise ConfigurationError(f"Unknown voltage table: {name}")

    df = read_csv(path, required_cols=TABLE_COLUMNS)
    df = df.astype({"phase_f": float, "phase_f2": float})
    logging.info(f"Loaded voltage table {name} with {len(df)} gates")
    return stack_from_records(df.to_dict(orient="records"), cycle_origin, v_b3_mV,
                              b3_gate, ac_only)


def periodic_conveyor(n_gates=40, amplitude_mV=120.0, spacing_nm=ELECTRODE_SPACING_NM,
                      step_f=0.5, step_f2=0.25):
    """
    Uniform gate array with a constant phase step per electrode.

    The default steps (half a turn for f, a quarter turn for f/2) give a
    travelling wave that advances two electrode spacings per primary cycle.
    """
    records = [
        {
            "gate": f"G{n}",
            "center_nm": n * spacing_nm,
            "amplitude_mV": amplitude_mV,
            "dc_offset_mV": 0.0,
            "phase_f": step_f * n,
            "phase_f2": step_f2 * n,
        }
        for n in range(n_gates)
    ]
    return stack_from_records(records)
