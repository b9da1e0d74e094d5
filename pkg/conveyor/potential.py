# conveyor/potential.py

import logging
from dataclasses import dataclass, field
from typing import Optional
import numpy as np
import pandas as pd

from backend.config import (
    ELECTRODE_SPACING_NM,
    GRID_SPACING_NM,
    KERNEL_WIDTH_NM,
    LEVER_ARM_MEV_PER_MV,
    NOMINAL_DISPLACEMENT_NM,
    PLUNGER_PITCH_NM,
)
from backend.errors import ConfigurationError, ValidationError
from conveyor.waveform import gate_voltages

FWHM_EXPONENT = 4.0 * np.log(2.0)


@dataclass(frozen=True)
class Gate:
    gate_id: str
    center_nm: float
    kernel_width_nm: float = KERNEL_WIDTH_NM
    lever_arm: float = LEVER_ARM_MEV_PER_MV  # meV per mV


@dataclass(frozen=True)
class GateStack:
    """
    Ordered gate electrodes along the channel.

    cycle_origin is the number of primary-tone cycles between the drive
    phase reference (t = 0) and the loading configuration, so that a
    conveyor cycle count c maps to model time (c + cycle_origin) / f.
    """
    gates: tuple
    plunger_pitch_nm: float = PLUNGER_PITCH_NM
    cycle_origin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        errors = []
        centers = [g.center_nm for g in self.gates]
        if any(b <= a for a, b in zip(centers, centers[1:])):
            errors.append("gates.center_nm: centers must be strictly increasing")
        for g in self.gates:
            if not g.kernel_width_nm > 0:
                errors.append(f"{g.gate_id}.kernel_width_nm: must be > 0")
            if not g.lever_arm > 0:
                errors.append(f"{g.gate_id}.lever_arm: must be > 0")
        if errors:
            raise ValidationError("Invalid gate stack", errors)

    @property
    def gate_ids(self):
        return [g.gate_id for g in self.gates]

    @property
    def centers(self):
        return np.array([g.center_nm for g in self.gates], dtype=float)

    @property
    def extent(self):
        return float(self.gates[0].center_nm), float(self.gates[-1].center_nm)

    def default_grid(self, spacing_nm=GRID_SPACING_NM):
        lo, hi = self.extent
        n = int(round((hi - lo) / spacing_nm)) + 1
        return np.linspace(lo, hi, n)

    def index_of(self, gate_id):
        return self.gate_ids.index(gate_id)


@dataclass(frozen=True)
class PotentialProfile:
    x_grid: np.ndarray
    values: np.ndarray           # meV
    t_ns: float = 0.0
    cycle_count: Optional[float] = None

    def __post_init__(self):
        x = np.asarray(self.x_grid, dtype=float)
        u = np.asarray(self.values, dtype=float)
        errors = []
        if x.shape != u.shape or x.ndim != 1:
            errors.append("values: must have the same 1D shape as x_grid")
        elif np.any(np.diff(x) <= 0):
            errors.append("x_grid: must be strictly increasing")
        if not np.all(np.isfinite(u)):
            errors.append("values: must be finite")
        if errors:
            raise ValidationError("Invalid potential profile", errors)
        object.__setattr__(self, "x_grid", x)
        object.__setattr__(self, "values", u)

    def to_frame(self):
        return pd.DataFrame({"x_nm": self.x_grid, "U_meV": self.values})


@dataclass(frozen=True)
class Minimum:
    position_nm: float
    depth_meV: float
    curvature: float             # meV / nm^2


@dataclass(frozen=True)
class Barrier:
    position_nm: float
    height_meV: float            # above the deeper of the two minima


@dataclass(frozen=True)
class ConveyorState:
    cycle_count: Optional[float]
    minima: tuple = field(default_factory=tuple)
    barrier: Optional[Barrier] = None


def kernel(u):
    """Unit-peak Gaussian bump; u is distance in units of the FWHM."""
    return np.exp(-FWHM_EXPONENT * np.square(u))


def cycle_time_ns(stack, f, c):
    """Model time in ns at conveyor cycle count c."""
    return (np.asarray(c, dtype=float) + stack.cycle_origin) / f * 1e9


def _check_grid(stack, x_grid):
    lo, hi = stack.extent
    x = np.asarray(x_grid, dtype=float)
    if x.size and (x.min() < lo - 1e-9 or x.max() > hi + 1e-9):
        raise ValidationError("Invalid grid", [f"x_grid: must lie within the stack extent [{lo}, {hi}] nm"])
    return x


def potential_from_voltages(stack, voltages_mV, x_grid=None):
    """Electron potential energy (meV) for a fixed vector of gate voltages."""
    if not stack.gates:
        raise ConfigurationError("Gate stack is empty")
    x = stack.default_grid() if x_grid is None else _check_grid(stack, x_grid)
    v = np.asarray(voltages_mV, dtype=float)
    if v.shape != (len(stack.gates),):
        raise ConfigurationError(f"Expected {len(stack.gates)} gate voltages, got {v.shape}")
    widths = np.array([g.kernel_width_nm for g in stack.gates])
    levers = np.array([g.lever_arm for g in stack.gates])
    k = kernel((x[:, None] - stack.centers[None, :]) / widths[None, :])
    return x, k @ (-levers * v)


def synthesize_potential(stack, waveforms, f, t, x_grid=None):
    """
    Superpose the gate kernels weighted by the instantaneous gate voltages.

    Raises:
        ConfigurationError: If the stack is empty or waveforms do not match the gates
        ValidationError: If the grid extends beyond the outermost gates
    """
    if not stack.gates:
        raise ConfigurationError("Gate stack is empty")
    if [w.gate_id for w in waveforms] != stack.gate_ids:
        raise ConfigurationError("Waveform gate ids do not match the gate stack order")
    voltages = gate_voltages(waveforms, f, t)
    x, u = potential_from_voltages(stack, voltages, x_grid)
    c = float(t) * 1e-9 * f - stack.cycle_origin
    return PotentialProfile(x, u, t_ns=float(t), cycle_count=c)


def _quadratic_vertex(x, u, i, h):
    left, mid, right = u[i - 1], u[i], u[i + 1]
    den = left - 2.0 * mid + right
    if den == 0:
        return x[i], mid, 0.0
    shift = 0.5 * h * (left - right) / den
    value = mid - (left - right) ** 2 / (8.0 * den)
    return x[i] + shift, value, den / h ** 2


def find_extrema(p):
    """
    Locate the minima of a profile and the barrier between the two deepest.

    Minima are grid points lower than their left neighbour and not higher than
    their right neighbour, refined by a 3-point parabola. A monotone profile
    gives no minima.
    """
    x, u = p.x_grid, p.values
    if x.size < 3:
        raise ValidationError("Invalid potential profile", ["x_grid: need at least 3 points"])
    h = float(np.mean(np.diff(x)))

    idx = [i for i in range(1, x.size - 1) if u[i] < u[i - 1] and u[i] <= u[i + 1]]
    minima = tuple(Minimum(*_quadratic_vertex(x, u, i, h)) for i in idx)

    barrier = None
    if len(idx) >= 2:
        deepest = sorted(range(len(idx)), key=lambda k: minima[k].depth_meV)[:2]
        lo, hi = sorted(idx[k] for k in deepest)
        j = lo + int(np.argmax(u[lo:hi + 1]))
        if lo < j < hi:
            pos, top, _ = _quadratic_vertex(x, u, j, h)
        else:
            pos, top = x[j], u[j]
        floor = min(minima[k].depth_meV for k in deepest)
        barrier = Barrier(float(pos), float(top - floor))

    return ConveyorState(p.cycle_count, minima, barrier)


def displacement_for_cycles(c):
    """Nominal displacement in nm after c conveyor cycles."""
    if np.any(np.asarray(c) < 0):
        raise ValidationError("Invalid cycle count", [f"c: must be >= 0, got {c}"])
    return NOMINAL_DISPLACEMENT_NM * c


def potential_sweep(stack, waveforms, f, cycles, x_grid=None):
    """
    Render profiles over a list of cycle counts.

    Returns:
        (profiles, extrema) DataFrames; profiles has columns (c, x_nm, U_meV),
        extrema has one row per cycle with the minima and barrier summary.
    """
    frames = []
    rows = []
    for c in cycles:
        profile = synthesize_potential(stack, waveforms, f, cycle_time_ns(stack, f, c), x_grid)
        frame = profile.to_frame()
        frame.insert(0, "c", float(c))
        frames.append(frame)

        state = find_extrema(profile)
        rows.append({
            "c": float(c),
            "n_minima": len(state.minima),
            "minima_nm": ";".join(f"{m.position_nm:.3f}" for m in state.minima),
            "barrier_nm": state.barrier.position_nm if state.barrier else np.nan,
            "barrier_height_meV": state.barrier.height_meV if state.barrier else np.nan,
        })

    logging.info(f"Potential sweep over {len(rows)} cycle points")
    return pd.concat(frames, ignore_index=True), pd.DataFrame(rows)


def track_minima(stack, waveforms, f, cycles, x_grid=None, max_jump_nm=ELECTRODE_SPACING_NM):
    """
    Follow each potential minimum across successive cycle samples.

    Minima are matched to the nearest surviving track within max_jump_nm;
    unmatched minima open new tracks and unmatched tracks end.

    Returns:
        DataFrame with columns (c, track, x_nm, U_meV)
    """
    tracks = {}
    next_id = 0
    rows = []
    for c in cycles:
        profile = synthesize_potential(stack, waveforms, f, cycle_time_ns(stack, f, c), x_grid)
        minima = list(find_extrema(profile).minima)

        pairs = sorted(
            (abs(m.position_nm - last), tid, k)
            for tid, last in tracks.items()
            for k, m in enumerate(minima)
        )
        claimed_tracks, claimed_minima, updated = set(), set(), {}
        for dist, tid, k in pairs:
            if dist > max_jump_nm or tid in claimed_tracks or k in claimed_minima:
                continue
            claimed_tracks.add(tid)
            claimed_minima.add(k)
            updated[tid] = k
        for k in range(len(minima)):
            if k not in claimed_minima:
                updated[next_id] = k
                next_id += 1

        tracks = {}
        for tid, k in sorted(updated.items()):
            m = minima[k]
            tracks[tid] = m.position_nm
            rows.append({"c": float(c), "track": tid, "x_nm": m.position_nm, "U_meV": m.depth_meV})

    return pd.DataFrame(rows, columns=["c", "track", "x_nm", "U_meV"])
