# dynamics/sequences.py

import logging
import numpy as np
import pandas as pd

from backend.config import DELTA_EZ_HZ
from backend.errors import ConfigurationError, ValidationError
from benchmarking.fitting import fit_gaussian_decay
from conveyor.potential import track_minima
from data.io import read_yaml
from dynamics.hamiltonian import exchange_propagators, on_spin, rx
from exchange.coherence import get_default_table, t2_at_cycle
from exchange.models import get_default_model, j_at_cycle

EDSR_GRADIENT = "data/fixtures/edsr_gradient.yaml"

_gradient = None


def _check_waits(wait_times_ns):
    t = np.atleast_1d(np.asarray(wait_times_ns, dtype=float))
    if np.any(t < 0):
        raise ValidationError("Wait times must be >= 0")
    return t


def dcphase_trace(J_profile, wait_times_ns, other_state=0, delta_ez_Hz=DELTA_EZ_HZ):
    """
    Decoupled controlled-phase sequence on Q2 with Q5 as the partner spin.

    Rx(pi/2) on Q2, exchange for t/2, Rx(pi) on both, exchange for t/2,
    Rx(pi/2) on Q2, then parity readout of Q2 against a down reference spin.
    The echo removes the dEz precession, leaving a phase pi J t.

    Args:
        J_profile: exchange in Hz, scalar or one value per wait time
        wait_times_ns: total exchange time t per point
        other_state: initial state of Q5 (0 = down, 1 = up)

    Returns:
        Array of parallel-spin probabilities
    """
    t = _check_waits(wait_times_ns)
    if other_state not in (0, 1):
        raise ValidationError("other_state must be 0 or 1")
    J = np.broadcast_to(np.asarray(J_profile, dtype=float), t.shape)

    half = exchange_propagators(J, delta_ez_Hz, t / 2)
    r_half = on_spin(rx(np.pi / 2), 1)
    echo = on_spin(rx(np.pi), 1) @ on_spin(rx(np.pi), 2)

    psi = np.zeros(4, dtype=complex)
    psi[2 * other_state] = 1.0      # Q2 down, Q5 in other_state
    out = r_half @ half @ echo @ half @ r_half @ psi
    # Q2 down: spin-basis indices 0 and 2
    return np.abs(out[:, 0]) ** 2 + np.abs(out[:, 2]) ** 2


def extract_exchange_from_trace(t_ns, P):
    """
    Exchange (Hz) from a DCPhase trace: the trace oscillates at J/2.

    Returns 0 for a flat trace.
    """
    t = np.asarray(t_ns, dtype=float)
    P = np.asarray(P, dtype=float)
    if np.ptp(P) < 1e-9:
        logging.warning("Flat DCPhase trace; exchange reported as 0")
        return 0.0
    fit = fit_gaussian_decay(t * 1e-3, P)
    return float(2.0 * fit["frequency"] * 1e6)


def dcphase_map(cycles, wait_times_ns, model=None, coherence=None, other_state=0,
                delta_ez_Hz=DELTA_EZ_HZ):
    """
    DCPhase traces over conveyor cycles with a Gaussian envelope from T2*(Q2|Q5=0).

    Returns:
        DataFrame with columns (c, t_ns, P_parallel)
    """
    model = model if model is not None else get_default_model()
    coherence = coherence if coherence is not None else get_default_table()
    t = _check_waits(wait_times_ns)

    frames = []
    for c in np.atleast_1d(cycles):
        J = j_at_cycle(model, float(c))
        t2_us = t2_at_cycle(coherence, float(c), "Q2|Q5=0")
        envelope = np.exp(-(t * 1e-3 / t2_us) ** 2)
        P = 0.5 + (dcphase_trace(J, t, other_state, delta_ez_Hz) - 0.5) * envelope
        frames.append(pd.DataFrame({"c": float(c), "t_ns": t, "P_parallel": P}))
    return pd.concat(frames, ignore_index=True)


def cz_fringes(theta, phase_error=0.0, control_state=0, heating_shift=0.0):
    """
    Ramsey fringe of the target qubit around a CZ for a given control state.

    The control |1> branch is shifted by the conditional phase pi + phase_error
    plus any heating-induced shift.
    """
    theta = np.asarray(theta, dtype=float)
    if control_state not in (0, 1):
        raise ValidationError("control_state must be 0 or 1")
    shift = control_state * (np.pi + phase_error + heating_shift)
    return (1.0 + np.cos(theta + shift)) / 2.0


def fringe_contrast_metric(theta, phase_error=0.0, heating_shift=0.0):
    """Variance over theta of the summed control-0 and control-1 fringes; zero at a perfect CZ."""
    total = cz_fringes(theta, phase_error, 0, heating_shift) + cz_fringes(theta, phase_error, 1, heating_shift)
    return float(np.var(total))


def get_gradient_profile():
    global _gradient
    if _gradient is None:
        _gradient = read_yaml(EDSR_GRADIENT)
    return _gradient


def edsr_frequency(x_nm, qubit="Q2", other_spin_state=0, J_Hz=0.0, gradient=None):
    """
    Resonance frequency (Hz) of one qubit at position x_nm.

    The line splits by J: +J/2 when the other spin is up, -J/2 when down.
    """
    gradient = gradient if gradient is not None else get_gradient_profile()
    if qubit not in gradient:
        raise ConfigurationError(f"No resonance profile for {qubit}")
    g = gradient[qubit]
    x = np.asarray(x_nm, dtype=float)
    f0 = g["f_ref_GHz"] * 1e9 + g["slope_MHz_per_nm"] * 1e6 * (x - g["x_ref_nm"])
    sign = 1.0 if other_spin_state else -1.0
    f = f0 + sign * np.asarray(J_Hz, dtype=float) / 2.0
    return float(f) if np.ndim(f) == 0 else f


def edsr_vs_cycle(stack, waveforms, f, cycles, model=None, gradient=None):
    """
    Resonance lines of Q2 (left dot) and Q5 (right dot) while the conveyor
    brings them together, split by the exchange at each cycle.

    Returns:
        DataFrame with columns (c, qubit, x_nm, other_spin, f_Hz)
    """
    model = model if model is not None else get_default_model()
    tracks = track_minima(stack, waveforms, f, cycles)
    first = tracks[tracks.c == tracks.c.min()].sort_values("x_nm")
    if len(first) < 2:
        raise ConfigurationError("Resonance sweep needs two separate dots at the first cycle")
    owners = {int(first.track.iloc[0]): "Q2", int(first.track.iloc[-1]): "Q5"}

    rows = []
    for row in tracks[tracks.track.isin(owners)].itertuples(index=False):
        J = float(j_at_cycle(model, row.c))
        qubit = owners[int(row.track)]
        for other in (0, 1):
            rows.append({
                "c": float(row.c), "qubit": qubit, "x_nm": float(row.x_nm), "other_spin": other,
                "f_Hz": edsr_frequency(row.x_nm, qubit, other, J, gradient),
            })
    return pd.DataFrame(rows, columns=["c", "qubit", "x_nm", "other_spin", "f_Hz"])
