# dynamics/fidelity.py

import logging
from dataclasses import dataclass
import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.integrate import simpson

from backend.config import QUADRATURE_MAX_ORDER, QUADRATURE_TOL, T_MEASURE_IRB_S, T_MEASURE_T2_S
from backend.errors import DomainError, NumericalError, ValidationError
from data.io import read_yaml
from dynamics.evolution import (
    calibrate_cz,
    check_unitary,
    conditional_phase,
    evolve,
    flip_flop_error,
    local_phase_corrected_cz,
)
from dynamics.schedule import cz_schedule
from exchange.coherence import get_default_table, t2_at_cycle

REFERENCE_VALUES = "data/fixtures/reference_values.yaml"

# f_1 = Q5 with Q2 down, f_2 = Q2 with Q5 down, f_3 = Q5 with Q2 up
TRAJECTORIES = ("Q5|Q2=0", "Q2|Q5=0", "Q5|Q2=1")


def average_gate_fidelity(U_exp, U_ideal, d=None):
    """
    Average gate fidelity (|tr(U_ideal^dag U_exp)|^2 + d) / (d (d + 1)).

    Raises:
        ValidationError: If either matrix is not unitary
    """
    U_exp = check_unitary(U_exp, "U_exp")
    U_ideal = check_unitary(U_ideal, "U_ideal")
    d = d or U_exp.shape[0]
    tr = np.trace(U_ideal.conj().T @ U_exp)
    return float((abs(tr) ** 2 + d) / (d * (d + 1)))


@dataclass(frozen=True)
class NoiseModel:
    """
    Quasistatic Gaussian offset x ~ N(0, sigma) acting on the diagonal phases.

    `coupling` holds either three weights (c1, c2, c3) on f_1, f_2, f_3,
    giving per-state multipliers (0, c1, c2, c1 + c3) on |00>, |01>, |10>,
    |11>, or four explicit multipliers.
    """
    sigma_Hz: float
    coupling: tuple = (1.0, 1.0, 1.0)
    t_m_s: float = T_MEASURE_IRB_S
    t_e_ns: float = 58.0

    def __post_init__(self):
        errors = []
        if self.sigma_Hz < 0:
            errors.append("sigma_Hz: must be >= 0")
        if len(self.coupling) not in (3, 4):
            errors.append("coupling: expected 3 weights or 4 multipliers")
        if not self.t_e_ns > 0:
            errors.append("t_e_ns: must be > 0")
        if not self.t_m_s > self.t_e_ns * 1e-9:
            errors.append("t_m_s: measurement horizon must exceed the gate time")
        if errors:
            raise ValidationError("Invalid noise model", errors)

    @property
    def multipliers(self):
        c = np.asarray(self.coupling, dtype=float)
        if c.size == 4:
            return c
        return np.array([0.0, c[0], c[1], c[0] + c[2]])


def fidelity_at_offsets(U_exp, U_ideal, noise, x_Hz):
    """Gate fidelity of U_exp dressed with the diagonal noise phases, vectorized over x."""
    d = U_exp.shape[0]
    m = np.diag(U_ideal.conj().T @ U_exp)
    x = np.atleast_1d(np.asarray(x_Hz, dtype=float))
    phases = np.exp(-2j * np.pi * np.outer(x * noise.t_e_ns * 1e-9, noise.multipliers))
    tr = phases @ m
    return (np.abs(tr) ** 2 + d) / (d * (d + 1))


def _gauss_hermite_mean(f, sigma, order):
    y, w = hermgauss(order)
    return float(np.sum(w * f(np.sqrt(2.0) * sigma * y)) / np.sqrt(np.pi))


def noise_averaged_fidelity(target, noise, U_ideal=None):
    """
    Fidelity averaged over the quasistatic offset by Gauss-Hermite quadrature.

    The order starts at 8 and doubles until the estimate moves by less than
    QUADRATURE_TOL.

    Args:
        target: ExchangeSchedule (evolved first) or a 4x4 unitary
        noise: NoiseModel
        U_ideal: reference gate; defaults to the local-phase-corrected CZ of the target
    """
    U_exp = evolve(target) if hasattr(target, "segments") else np.asarray(target, dtype=complex)
    U_exp = check_unitary(U_exp, "U_exp")
    U_ideal = local_phase_corrected_cz(U_exp) if U_ideal is None else check_unitary(U_ideal, "U_ideal")

    if noise.sigma_Hz == 0:
        return average_gate_fidelity(U_exp, U_ideal)

    def f(x):
        return fidelity_at_offsets(U_exp, U_ideal, noise, x)

    order = 8
    previous = _gauss_hermite_mean(f, noise.sigma_Hz, order)
    while order < QUADRATURE_MAX_ORDER:
        order *= 2
        current = _gauss_hermite_mean(f, noise.sigma_Hz, order)
        if abs(current - previous) < QUADRATURE_TOL:
            return current
        previous = current
    raise NumericalError(f"Gauss-Hermite quadrature did not converge by order {QUADRATURE_MAX_ORDER}")


def sigma_rescale(t_e_s, t_m_from_s, t_m_to_s):
    """
    Factor by which the quasistatic sigma grows from one measurement horizon to another.

    Raises:
        DomainError: If 0.401 t_m / t_e <= 1 for either horizon
    """
    if not t_e_s > 0:
        raise DomainError(f"Gate time must be positive, got {t_e_s}")
    a_from = 0.401 * t_m_from_s / t_e_s
    a_to = 0.401 * t_m_to_s / t_e_s
    if a_from <= 1 or a_to <= 1:
        raise DomainError(
            f"Logarithm argument must exceed 1 (from={a_from:.4g}, to={a_to:.4g})"
        )
    return float(np.sqrt(np.log(a_to) / np.log(a_from)))


def sigma_from_t2(t2_us):
    """Gaussian frequency spread (Hz) behind a Ramsey decay exp(-(t/T2*)^2)."""
    t2 = np.asarray(t2_us, dtype=float)
    if np.any(t2 <= 0):
        raise ValidationError("T2 must be positive")
    out = np.sqrt(2.0) / (2.0 * np.pi * t2 * 1e-6)
    return float(out) if np.ndim(out) == 0 else out


def echo_rescale(t2star_us, t2echo_us):
    """
    Per-qubit factor that turns a T2*-based sigma into one taken from Hahn-echo
    T2. Echo values drop the slow part of the noise, so the factor is below 1.
    """
    return {q: sigma_from_t2(t2echo_us[q]) / sigma_from_t2(t2star_us[q]) for q in t2star_us}


def dephasing_integral(schedule, coherence, which, points_per_segment=2001):
    """Integral of dt / T2*(c(t)) over the pulse (dimensionless)."""
    total = 0.0
    for s in schedule.segments:
        if s.c_start is None:
            raise ValidationError("Dephasing needs cycle positions", [f"{s.label}: no cycle ramp"])
        tau = np.linspace(0.0, s.duration_ns, points_per_segment)
        t2 = np.asarray(t2_at_cycle(coherence, s.cycle_at(tau), which), dtype=float)
        total += simpson(1e-3 / t2, x=tau)   # ns / us
    return float(total)


def dephasing_budget(schedule=None, coherence=None, t_m_from_s=T_MEASURE_T2_S,
                     t_m_to_s=T_MEASURE_IRB_S):
    """
    Dephasing infidelity of the CZ pulse from the T2* trajectories along the conveyor.

    Each diagonal phase spreads with sqrt(2) * rescale * integral(dt / T2*),
    where rescale carries the T2* horizon over to the IRB horizon.
    """
    schedule = schedule if schedule is not None else cz_schedule()
    coherence = coherence if coherence is not None else get_default_table()
    t_e_ns = schedule.total_ns
    rescale = sigma_rescale(t_e_ns * 1e-9, t_m_from_s, t_m_to_s)
    alpha = {k: float(np.sqrt(2.0) * rescale * dephasing_integral(schedule, coherence, k))
             for k in TRAJECTORIES}

    # unit-width offset: sigma * 2 pi * t_e = 1, phases are alpha * x
    noise = NoiseModel(1.0 / (2.0 * np.pi * t_e_ns * 1e-9),
                       tuple(alpha[k] for k in TRAJECTORIES), t_m_to_s, t_e_ns)
    eye = np.eye(4, dtype=complex)
    fidelity = noise_averaged_fidelity(eye, noise, eye)

    u = noise.multipliers
    du = u[:, None] - u[None, :]
    e_trace = 4.0 + np.sum(np.exp(-du[np.triu_indices(4, 1)] ** 2 / 2.0)) * 2.0
    analytic = (e_trace + 4.0) / 20.0

    refs = read_yaml(REFERENCE_VALUES)
    result = {
        "t_e_ns": t_e_ns,
        "rescale": rescale,
        "alpha": alpha,
        "fidelity": fidelity,
        "infidelity": 1.0 - fidelity,
        "infidelity_analytic": 1.0 - analytic,
        "sigma_star_Hz": {q: sigma_from_t2(v) for q, v in refs["t2star_us"].items()},
        "sigma_echo_Hz": {q: sigma_from_t2(v) for q, v in refs["t2echo_us"].items()},
        "echo_rescale": echo_rescale(refs["t2star_us"], refs["t2echo_us"]),
    }
    logging.info(f"Dephasing budget: infidelity={result['infidelity']:.4e} | rescale={rescale:.4f}")
    return result


def coherent_budget(schedule=None):
    """Coherent infidelity of the calibrated CZ pulse against the virtual-Z corrected CZ."""
    schedule = calibrate_cz(schedule if schedule is not None else cz_schedule())
    U = evolve(schedule)
    fidelity = average_gate_fidelity(U, local_phase_corrected_cz(U))
    result = {
        "t_e_ns": schedule.total_ns,
        "j_scale": schedule.j_scale,
        "peak_J_Hz": schedule.peak_j(),
        "conditional_phase": conditional_phase(U),
        "flip_flop_error": flip_flop_error(U),
        "fidelity": fidelity,
        "infidelity": 1.0 - fidelity,
    }
    logging.info(
        f"Coherent budget: infidelity={result['infidelity']:.4e} | "
        f"flip_flop={result['flip_flop_error']:.3e} | j_scale={schedule.j_scale:.5f}"
    )
    return result
