# dynamics/schedule.py

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional
import numpy as np
from scipy.integrate import simpson

from backend.config import CZ_STAGES, DELTA_EZ_HZ
from backend.errors import ConfigurationError, ValidationError
from exchange.models import get_default_model, j_at_cycle

CALIBRATION_STAGES = [
    {"label": "load", "duration_ns": 2.0, "c_start": 0.0, "c_end": 0.0, "frequency_MHz": 0.0, "j_MHz": 0.0},
    {"label": "approach", "duration_ns": 2.0, "c_start": 0.4, "c_end": 0.65, "frequency_MHz": 125.0},
    {"label": "interaction", "duration_ns": 23.0, "c_start": 0.65, "c_end": 0.88, "frequency_MHz": 10.0},
    {"label": "return_interaction", "duration_ns": 23.0, "c_start": 0.88, "c_end": 0.65, "frequency_MHz": 10.0},
    {"label": "return_approach", "duration_ns": 2.0, "c_start": 0.65, "c_end": 0.4, "frequency_MHz": 125.0},
    {"label": "unload", "duration_ns": 2.0, "c_start": 0.0, "c_end": 0.0, "frequency_MHz": 0.0, "j_MHz": 0.0},
]


@dataclass(frozen=True)
class Segment:
    """
    One stage of an exchange pulse.

    J follows either a linear ramp between j_start_Hz and j_end_Hz or, when
    those are unset, the schedule's exchange model evaluated along the
    linear cycle ramp c_start -> c_end.
    """
    label: str
    duration_ns: float
    c_start: Optional[float] = None
    c_end: Optional[float] = None
    j_start_Hz: Optional[float] = None
    j_end_Hz: Optional[float] = None
    delta_ez_Hz: float = DELTA_EZ_HZ

    def cycle_at(self, tau_ns):
        if self.c_start is None:
            return None
        frac = np.asarray(tau_ns, dtype=float) / self.duration_ns
        return self.c_start + (self.c_end - self.c_start) * frac


@dataclass(frozen=True)
class ExchangeSchedule:
    segments: tuple = ()
    model: object = None
    j_scale: float = 1.0
    delta_ez_profile: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        errors = []
        for s in self.segments:
            if not s.duration_ns > 0:
                errors.append(f"{s.label}.duration_ns: must be > 0")
            if s.j_start_Hz is None and s.c_start is None:
                errors.append(f"{s.label}: needs a J ramp or a cycle ramp")
            if s.j_start_Hz is not None and min(s.j_start_Hz, s.j_end_Hz) < 0:
                errors.append(f"{s.label}: J must be >= 0")
        if self.j_scale < 0:
            errors.append("j_scale: must be >= 0")
        if errors:
            raise ValidationError("Invalid exchange schedule", errors)

    @property
    def total_ns(self):
        return float(sum(s.duration_ns for s in self.segments))

    def with_scale(self, j_scale):
        return replace(self, j_scale=float(j_scale))

    def sample(self, segment, tau_ns):
        """J (Hz) and dEz (Hz) inside a segment at local times tau_ns."""
        tau = np.asarray(tau_ns, dtype=float)
        c = segment.cycle_at(tau)
        if segment.j_start_Hz is not None:
            j = segment.j_start_Hz + (segment.j_end_Hz - segment.j_start_Hz) * tau / segment.duration_ns
        else:
            model = self.model if self.model is not None else get_default_model()
            j = np.asarray(j_at_cycle(model, c), dtype=float)
        j = self.j_scale * np.broadcast_to(j, tau.shape)

        if self.delta_ez_profile is not None and c is not None:
            dez = np.asarray(self.delta_ez_profile(c), dtype=float)
        else:
            dez = segment.delta_ez_Hz
        return j, np.broadcast_to(dez, tau.shape)

    def trace(self, points_per_segment=401):
        """Sampled (t_ns, c, J_Hz, dEz_Hz) arrays over the whole pulse."""
        out = {"t_ns": [], "c": [], "J_Hz": [], "delta_ez_Hz": []}
        t0 = 0.0
        for s in self.segments:
            tau = np.linspace(0.0, s.duration_ns, points_per_segment)
            j, dez = self.sample(s, tau)
            c = s.cycle_at(tau)
            out["t_ns"].append(t0 + tau)
            out["c"].append(np.full_like(tau, np.nan) if c is None else c)
            out["J_Hz"].append(j)
            out["delta_ez_Hz"].append(dez)
            t0 += s.duration_ns
        return {k: np.concatenate(v) if v else np.array([]) for k, v in out.items()}

    def j_integral(self, points_per_segment=2001):
        """Integral of J dt (cycles) by Simpson's rule on each segment."""
        total = 0.0
        for s in self.segments:
            tau = np.linspace(0.0, s.duration_ns, points_per_segment)
            j, _ = self.sample(s, tau)
            total += simpson(j, x=tau * 1e-9)
        return float(total)

    def peak_j(self, points_per_segment=401):
        tr = self.trace(points_per_segment)
        return float(tr["J_Hz"].max()) if tr["J_Hz"].size else 0.0

    def to_json(self):
        return json.dumps({
            "j_scale": self.j_scale,
            "total_ns": self.total_ns,
            "segments": [s.__dict__ for s in self.segments],
        }, indent=2, sort_keys=True)


def stages_to_segments(stages, delta_ez_Hz=DELTA_EZ_HZ):
    """
    Turn stage dicts (label, duration_ns, c_start, c_end, frequency_MHz and an
    optional fixed j_MHz) into segments.

    Raises:
        ConfigurationError: If a stage's cycle advance differs from frequency x duration
    """
    segments = []
    for st in stages:
        label = st.get("label", f"stage{len(segments)}")
        duration = float(st["duration_ns"])
        if not duration > 0:
            raise ConfigurationError(f"Stage {label}: duration must be positive")
        c0, c1 = float(st["c_start"]), float(st["c_end"])
        advance = abs(c1 - c0)
        expected = float(st.get("frequency_MHz", 0.0)) * 1e6 * duration * 1e-9
        if abs(advance - expected) > 1e-9:
            raise ConfigurationError(
                f"Stage {label}: cycle advance {advance:.6g} does not match "
                f"frequency x duration {expected:.6g}"
            )
        if st.get("j_MHz") is not None:
            j = float(st["j_MHz"]) * 1e6
            segments.append(Segment(label, duration, c0, c1, j, j, delta_ez_Hz))
        else:
            segments.append(Segment(label, duration, c0, c1, delta_ez_Hz=delta_ez_Hz))
    return tuple(segments)


def cz_schedule(cfg=None):
    """
    CZ pulse built from conveyor stages (default 2+2+25+25+2+2 ns, 58 ns total).

    cfg keys: stages, delta_ez_Hz, j_scale, model, delta_ez_profile.
    """
    cfg = cfg or {}
    stages = cfg.get("stages") or CZ_STAGES
    segments = stages_to_segments(stages, float(cfg.get("delta_ez_Hz", DELTA_EZ_HZ)))
    return ExchangeSchedule(
        segments,
        model=cfg.get("model"),
        j_scale=float(cfg.get("j_scale", 1.0)),
        delta_ez_profile=cfg.get("delta_ez_profile"),
    )


def rectangular_schedule(area, peak_J_Hz, delta_ez_Hz=DELTA_EZ_HZ):
    """Constant-J pulse with the given integral of J dt (cycles)."""
    if not peak_J_Hz > 0 or area < 0:
        raise ValidationError("Invalid rectangular pulse", ["need peak_J_Hz > 0 and area >= 0"])
    if area == 0:
        return ExchangeSchedule(())
    duration_ns = area / peak_J_Hz * 1e9
    return ExchangeSchedule((Segment("rectangular", duration_ns, None, None,
                                     peak_J_Hz, peak_J_Hz, delta_ez_Hz),))
