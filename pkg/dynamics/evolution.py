# dynamics/evolution.py

import logging
import numpy as np
from scipy.optimize import brentq

from backend.config import EVOLVE_TOL, INITIAL_STEP_NS, MAX_SUBSTEPS, UNITARY_TOL
from backend.errors import NumericalError, ValidationError
from dynamics.hamiltonian import exchange_propagators, to_computational

# Fourth-order commutator-free exponential: two exponentials per step, each
# built from the Hamiltonian at the two Gauss-Legendre nodes.
_SQRT3 = np.sqrt(3.0)
ALPHA_1 = (3.0 - 2.0 * _SQRT3) / 12.0
ALPHA_2 = (3.0 + 2.0 * _SQRT3) / 12.0
NODES = (0.5 - _SQRT3 / 6.0, 0.5 + _SQRT3 / 6.0)


def wrap_phase(phi):
    """Map angles to (-pi, pi]."""
    out = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2.0 * np.pi)
    return float(out) if np.ndim(out) == 0 else out


def check_unitary(U, label="U", tol=UNITARY_TOL):
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValidationError(f"{label} is not a square matrix", [f"{label}.shape: {U.shape}"])
    err = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if err > tol:
        raise ValidationError(f"{label} is not unitary", [f"{label}: max |U^dag U - I| = {err:.3g}"])
    return U


def _ordered_product(steps):
    """U_n ... U_2 U_1 for a time-ordered stack of (n, 4, 4) propagators."""
    arr = steps
    while arr.shape[0] > 1:
        if arr.shape[0] % 2:
            arr = np.concatenate([arr, np.eye(4, dtype=complex)[None]], axis=0)
        arr = arr[1::2] @ arr[0::2]
    return arr[0]


def _normalize_phase(U):
    a = U[0, 0]
    if abs(a) < 1e-15:
        return U
    return U * (np.conj(a) / abs(a))


def _segment_steps(schedule, segment, n, noise_offset):
    dt = segment.duration_ns / n
    t0 = np.arange(n) * dt
    j1, d1 = schedule.sample(segment, t0 + NODES[0] * dt)
    j2, d2 = schedule.sample(segment, t0 + NODES[1] * dt)
    d1 = d1 + noise_offset
    d2 = d2 + noise_offset
    first = exchange_propagators(2 * (ALPHA_2 * j1 + ALPHA_1 * j2),
                                 2 * (ALPHA_2 * d1 + ALPHA_1 * d2), dt / 2)
    second = exchange_propagators(2 * (ALPHA_1 * j1 + ALPHA_2 * j2),
                                  2 * (ALPHA_1 * d1 + ALPHA_2 * d2), dt / 2)
    return second @ first


def propagate(schedule, n_steps_per_segment, noise_offset=0.0):
    """
    Time-ordered propagator with a fixed number of sub-steps per segment.

    Args:
        schedule: ExchangeSchedule
        n_steps_per_segment: int, or one int per segment
        noise_offset: Hz added to dEz over the whole pulse

    Returns:
        4x4 unitary in the computational basis |00>, |01>, |10>, |11>
        (Q2 first), phase-normalized so the |00> amplitude is real positive
    """
    segments = schedule.segments
    if not segments:
        return np.eye(4, dtype=complex)
    counts = np.broadcast_to(np.asarray(n_steps_per_segment, dtype=int), (len(segments),))
    steps = [_segment_steps(schedule, s, int(n), noise_offset) for s, n in zip(segments, counts)]
    U = _ordered_product(np.concatenate(steps, axis=0))
    return _normalize_phase(to_computational(U))


def evolve(schedule, noise_offset=0.0, return_steps=False):
    """
    Propagator of an exchange schedule with step doubling until the result
    changes by less than EVOLVE_TOL per entry.

    Raises:
        NumericalError: If convergence needs more than MAX_SUBSTEPS steps
    """
    if not schedule.segments:
        U = np.eye(4, dtype=complex)
        return (U, np.zeros(0, dtype=int)) if return_steps else U

    counts = np.array([max(1, int(np.ceil(s.duration_ns / INITIAL_STEP_NS))) for s in schedule.segments])
    U = propagate(schedule, counts, noise_offset)
    while True:
        if 2 * counts.sum() > MAX_SUBSTEPS:
            raise NumericalError(
                f"Evolution did not converge within {MAX_SUBSTEPS} sub-steps "
                f"(total {schedule.total_ns:.3g} ns)"
            )
        finer = propagate(schedule, 2 * counts, noise_offset)
        change = np.max(np.abs(finer - U))
        if change < EVOLVE_TOL:
            break
        counts, U = 2 * counts, finer

    return (U, counts) if return_steps else U


def conditional_phase(U):
    """phi_00 + phi_11 - phi_01 - phi_10 of the diagonal, wrapped to (-pi, pi]."""
    d = np.angle(np.diag(np.asarray(U)))
    return wrap_phase(d[0] + d[3] - d[1] - d[2])


def single_qubit_phases(U):
    d = np.angle(np.diag(np.asarray(U)))
    return wrap_phase(d[1] - d[0]), wrap_phase(d[2] - d[0])


def local_phase_corrected_cz(U):
    """Ideal CZ carrying the single-qubit Z phases of U (virtual-Z correction)."""
    phi_01, phi_10 = single_qubit_phases(U)
    return np.diag([1.0, np.exp(1j * phi_01), np.exp(1j * phi_10),
                    -np.exp(1j * (phi_01 + phi_10))]).astype(complex)


def flip_flop_error(U):
    """Population transferred between |01> and |10>."""
    return float(abs(np.asarray(U)[1, 2]) ** 2)


def calibrate_cz(schedule, target=np.pi):
    """
    Rescale J so the evolved conditional phase equals `target`.

    The scale is bracketed around the value that makes the integral of J dt
    equal to 1/2 and refined on the full propagator.

    Returns:
        ExchangeSchedule with the calibrated j_scale
    """
    area = schedule.with_scale(1.0).j_integral()
    if area <= 0:
        raise ValidationError("CZ calibration needs a schedule with nonzero exchange")
    s0 = 0.5 / area
    _, counts = evolve(schedule.with_scale(s0), return_steps=True)
    counts = 2 * counts

    def mismatch(s):
        return wrap_phase(conditional_phase(propagate(schedule.with_scale(s), counts)) - target)

    try:
        scale = brentq(mismatch, 0.8 * s0, 1.2 * s0, xtol=1e-13)
    except ValueError as e:
        raise NumericalError(f"CZ phase root not bracketed: {e}")
    logging.info(f"CZ calibration: j_scale={scale:.6f} | area={area * scale:.6f} | t_e={schedule.total_ns:.1f} ns")
    return schedule.with_scale(scale)


def cz_with_phase_error(schedule, delta):
    """Calibrated schedule rescaled so the conditional phase is pi + delta."""
    calibrated = calibrate_cz(schedule)
    return calibrated.with_scale(calibrated.j_scale * (1.0 - delta / np.pi))
