# conveyor/waveform.py

from dataclasses import dataclass, field
import numpy as np

from backend.errors import ValidationError

TONES = frozenset({"f", "f/2"})


@dataclass(frozen=True)
class GateWaveform:
    """
    Two-tone drive of a single gate electrode.

    Voltages are in mV, phases in radians. The primary tone runs at f and the
    second tone at f/2.
    """
    gate_id: str
    amplitude_mV: float
    dc_offset_mV: float = 0.0
    phase_f: float = 0.0
    phase_f2: float = 0.0
    enabled_tones: frozenset = field(default=TONES)

    def __post_init__(self):
        errors = []
        if not np.isfinite(self.amplitude_mV) or self.amplitude_mV < 0:
            errors.append(f"{self.gate_id}.amplitude_mV: must be finite and >= 0")
        if not np.isfinite(self.dc_offset_mV):
            errors.append(f"{self.gate_id}.dc_offset_mV: must be finite")
        if not (np.isfinite(self.phase_f) and np.isfinite(self.phase_f2)):
            errors.append(f"{self.gate_id}.phase: must be finite")
        unknown = set(self.enabled_tones) - TONES
        if unknown:
            errors.append(f"{self.gate_id}.enabled_tones: unknown tones {sorted(unknown)}")
        if errors:
            raise ValidationError("Invalid gate waveform", errors)
        object.__setattr__(self, "enabled_tones", frozenset(self.enabled_tones))

    def without_dc(self):
        return GateWaveform(self.gate_id, self.amplitude_mV, 0.0, self.phase_f,
                            self.phase_f2, self.enabled_tones)

    def with_dc(self, dc_offset_mV):
        return GateWaveform(self.gate_id, self.amplitude_mV, dc_offset_mV, self.phase_f,
                            self.phase_f2, self.enabled_tones)


def _check_frequency(f):
    if not f > 0:
        raise ValidationError("Invalid drive", [f"f: must be > 0, got {f}"])


def gate_voltage_at(w, f, t):
    """
    Gate voltage V(t) = V_DC + A/2 [sin(2 pi f t - phi) + sin(pi f t - theta)].

    Args:
        w: GateWaveform
        f: Primary tone frequency in Hz
        t: Time in ns (scalar or array)

    Returns:
        Voltage in mV, same shape as t
    """
    _check_frequency(f)
    t_s = np.asarray(t, dtype=float) * 1e-9
    v = np.full_like(t_s, w.dc_offset_mV)
    if "f" in w.enabled_tones:
        v = v + 0.5 * w.amplitude_mV * np.sin(2 * np.pi * f * t_s - w.phase_f)
    if "f/2" in w.enabled_tones:
        v = v + 0.5 * w.amplitude_mV * np.sin(np.pi * f * t_s - w.phase_f2)
    return float(v) if v.ndim == 0 else v


def gate_voltages(waveforms, f, t):
    """Voltages of all gates at a single time t (ns), as an array in gate order."""
    return np.array([gate_voltage_at(w, f, t) for w in waveforms], dtype=float)
