# decision/cz_calibration.py

import logging
import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from backend.config import B3_EXCHANGE_SCALE_MV, B3_REFERENCE_MV, CALIBRATION_GATE_TIME_NS, N_JOBS
from backend.errors import ValidationError
from dynamics.evolution import calibrate_cz, conditional_phase, evolve, wrap_phase
from dynamics.schedule import CALIBRATION_STAGES, cz_schedule
from dynamics.sequences import cz_fringes, fringe_contrast_metric

THETA = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
GRID_COLUMNS = ["offset_mV", "j_scale", "conditional_phase_rad", "phase_error_rad", "metric"]


def calibration_stages(gate_time_ns=CALIBRATION_GATE_TIME_NS):
    """
    Calibration pulse stretched to `gate_time_ns` by its two interaction stages.

    The interaction frequency is rescaled with the duration so the cycle
    advance of every stage is unchanged.
    """
    fixed = sum(s["duration_ns"] for s in CALIBRATION_STAGES if "interaction" not in s["label"])
    moving = sum(s["duration_ns"] for s in CALIBRATION_STAGES if "interaction" in s["label"])
    if not gate_time_ns > fixed:
        raise ValidationError("Gate time too short for the calibration pulse",
                              [f"gate_time_ns: {gate_time_ns} <= {fixed}"])
    factor = (gate_time_ns - fixed) / moving
    stages = []
    for s in CALIBRATION_STAGES:
        s = dict(s)
        if "interaction" in s["label"]:
            s["duration_ns"] = s["duration_ns"] * factor
            s["frequency_MHz"] = s["frequency_MHz"] / factor
        stages.append(s)
    return stages


def j_scale_at_offset(offset_mV, calibrated_scale, reference_mV=B3_REFERENCE_MV, scale_mV=B3_EXCHANGE_SCALE_MV):
    """Exchange scale at a B3 offset; J grows exponentially with the barrier voltage."""
    return calibrated_scale * np.exp((offset_mV - reference_mV) / scale_mV)


def _offset_point(schedule, offset_mV, j_scale, theta, heating_shift):
    phi = conditional_phase(evolve(schedule.with_scale(j_scale)))
    delta = wrap_phase(phi - np.pi)
    return {
        "offset_mV": float(offset_mV),
        "j_scale": float(j_scale),
        "conditional_phase_rad": float(phi),
        "phase_error_rad": float(delta),
        "metric": fringe_contrast_metric(theta, delta, heating_shift),
    }


def _parabolic_vertex(x, y, k):
    """Vertex of the parabola through the grid minimum and its neighbours."""
    x0, x1, x2 = x[k - 1:k + 2]
    y0, y1, y2 = y[k - 1:k + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / denom
    if a <= 0:
        return float(x1)
    return float(np.clip(-b / (2 * a), x0, x2))


def calibration_fringes(theta, phase_error=0.0, heating_shift=0.0):
    """Target-qubit fringes for control |0> and |1> around the CZ."""
    theta = np.asarray(theta, dtype=float)
    return pd.DataFrame({
        "theta_rad": theta,
        "P_control_0": cz_fringes(theta, phase_error, 0, heating_shift),
        "P_control_1": cz_fringes(theta, phase_error, 1, heating_shift),
    })


def cz_calibration_search(b3_offsets_mV, gate_time_ns=CALIBRATION_GATE_TIME_NS, heating_shift=0.0,
                          theta=None, reference_mV=B3_REFERENCE_MV, scale_mV=B3_EXCHANGE_SCALE_MV,
                          n_jobs=N_JOBS):
    """
    Pick the B3 offset that minimizes the variance of the summed CZ fringes.

    The exchange scale is calibrated to an exact CZ at `reference_mV` and
    follows the barrier exponentially elsewhere. A minimum on the edge of the
    grid is flagged rather than trusted.

    Args:
        b3_offsets_mV: candidate B3 offsets, at least three distinct values
        gate_time_ns: total CZ pulse duration
        heating_shift: extra control-|1> fringe phase after the MW burst (rad)

    Returns:
        dict with keys:
            - action: "set_offset" | "flag_boundary"
            - reason: str
            - optimal_offset_mV: parabolic refinement around the grid minimum
            - grid_minimum_mV: best grid point
            - boundary: bool
            - grid: DataFrame (offset_mV, j_scale, conditional_phase_rad, phase_error_rad, metric)
            - fringes: DataFrame of the fringes at the grid minimum
    """
    offsets = np.unique(np.asarray(b3_offsets_mV, dtype=float))
    if offsets.size < 3 or not np.all(np.isfinite(offsets)):
        raise ValidationError("Calibration search needs at least three distinct finite offsets",
                              [f"b3_offsets_mV: {np.asarray(b3_offsets_mV).tolist()}"])
    theta = THETA if theta is None else np.asarray(theta, dtype=float)

    schedule = cz_schedule({"stages": calibration_stages(gate_time_ns)})
    calibrated = calibrate_cz(schedule).j_scale
    points = Parallel(n_jobs=n_jobs)(
        delayed(_offset_point)(schedule, v, j_scale_at_offset(v, calibrated, reference_mV, scale_mV),
                               theta, heating_shift)
        for v in offsets
    )
    grid = pd.DataFrame(points, columns=GRID_COLUMNS)

    k = int(np.argmin(grid["metric"].to_numpy()))
    best = float(offsets[k])
    boundary = k in (0, offsets.size - 1)
    if boundary:
        optimum = best
        action = "flag_boundary"
        reason = f"Metric minimum at grid edge {best:.3f} mV; extend the offset range"
        logging.warning(f"CZ calibration: boundary minimum at {best:.3f} mV")
    else:
        optimum = _parabolic_vertex(offsets, grid["metric"].to_numpy(), k)
        action = "set_offset"
        reason = f"Fringe variance minimum {grid['metric'].iloc[k]:.3g} at {optimum:.3f} mV"

    logging.info(
        f"CZ calibration: gate_time={gate_time_ns:.1f} ns | offsets={offsets.size} | "
        f"optimum={optimum:.3f} mV | boundary={boundary} | heating={heating_shift:.3f} rad"
    )
    return {
        "action": action,
        "reason": reason,
        "optimal_offset_mV": optimum,
        "grid_minimum_mV": best,
        "boundary": bool(boundary),
        "grid": grid,
        "fringes": calibration_fringes(theta, grid["phase_error_rad"].iloc[k], heating_shift),
    }
