# benchmarking/fitting.py

import logging
import numpy as np
from scipy.optimize import curve_fit

from backend.config import T2_SENTINEL_FACTOR
from backend.errors import FitError, ValidationError

CZ_PER_CLIFFORD = 1.5
SQ_PER_CLIFFORD = 8.25


def rb_curve(L, A, p, B):
    return A * np.power(p, L) + B


def fit_rb(data):
    """
    Weighted least-squares fit of A p^L + B to a decay table.

    Args:
        data: DataFrame with columns L, mean, stderr and optionally n_shots

    Returns:
        dict with A, p, B, their stderr, covariance and a degenerate flag
    """
    for col in ("L", "mean", "stderr"):
        if col not in data.columns:
            raise ValidationError("Decay table is missing a column", [f"{col}: required"])
    df = data.sort_values("L")
    L = df["L"].to_numpy(dtype=float)
    y = df["mean"].to_numpy(dtype=float)
    if np.unique(L).size < 3:
        raise ValidationError("RB fit needs at least three distinct lengths")

    if np.ptp(y) < 1e-12:
        logging.warning(f"Flat RB decay at level {y.mean():.4f}; reporting p=1")
        return {"A": 0.0, "p": 1.0, "B": float(y.mean()),
                "stderr": {"A": 0.0, "p": 0.0, "B": 0.0},
                "cov": np.zeros((3, 3)).tolist(), "degenerate": True}

    sigma = df["stderr"].to_numpy(dtype=float).copy()
    zero = sigma <= 0
    if zero.any():
        if "n_shots" in df.columns:
            # binomial variance floor 1/(4 shots)
            sigma[zero] = np.sqrt(1.0 / (4.0 * df["n_shots"].to_numpy(dtype=float)[zero]))
        elif zero.all():
            sigma = None
        else:
            sigma[zero] = sigma[~zero].min()

    p0 = [y[0] - y[-1], 0.95, y[-1]]
    try:
        popt, pcov = curve_fit(
            rb_curve, L, y, p0=p0, sigma=sigma, absolute_sigma=False,
            bounds=([-np.inf, 0.0, -np.inf], [np.inf, 1.0, np.inf]),
            ftol=1e-14, xtol=1e-14, gtol=1e-14, maxfev=20000,
        )
    except RuntimeError as e:
        raise FitError(f"RB fit did not converge: {e}", {"p0": p0, "lengths": L.tolist()})

    stderr = np.sqrt(np.clip(np.diag(pcov), 0, None))
    result = {
        "A": float(popt[0]),
        "p": float(popt[1]),
        "B": float(popt[2]),
        "stderr": {"A": float(stderr[0]), "p": float(stderr[1]), "B": float(stderr[2])},
        "cov": pcov.tolist(),
        "degenerate": False,
    }
    logging.info(f"RB fit: p={result['p']:.5f} +/- {stderr[1]:.5f} | A={result['A']:.4f} | B={result['B']:.4f}")
    return result


def clifford_fidelity(p, n_qubits=2):
    """Average Clifford fidelity (1 + (d - 1) p) / d."""
    d = 2 ** n_qubits
    return float((1.0 + (d - 1) * p) / d)


def interleaved_cz_fidelity(p_cz, p_ref, n_qubits=2):
    """
    Interleaved gate fidelity from the two decay parameters.

    A ratio above 1 is reported as fidelity 1 with `clamped` set.
    """
    if not p_ref > 0:
        raise ValidationError("Reference decay parameter must be positive", [f"p_ref: {p_ref}"])
    ratio = p_cz / p_ref
    clamped = ratio > 1.0
    if clamped:
        logging.warning(f"Interleaved ratio {ratio:.5f} exceeds 1; fidelity clamped")
    return {
        "f_cz": clifford_fidelity(min(ratio, 1.0), n_qubits),
        "f_cz_unclamped": clifford_fidelity(ratio, n_qubits),
        "ratio": float(ratio),
        "clamped": bool(clamped),
    }


def composed_clifford_fidelity(r_cz, r_sq, cz_per_clifford=CZ_PER_CLIFFORD, sq_per_clifford=SQ_PER_CLIFFORD):
    """Clifford fidelity expected from the gate composition, 1 - (n_cz r_cz + n_sq r_sq)."""
    return float(1.0 - (cz_per_clifford * r_cz + sq_per_clifford * r_sq))


def joint_fidelity(fidelities):
    return float(np.prod(list(fidelities)))


def gaussian_decay(t, A, f, phi, C, T2):
    return A * np.exp(-(t / T2) ** 2) * np.sin(2 * np.pi * f * t + phi) + C


def _decay_by_rate(t, A, f, phi, C, rate):
    return A * np.exp(-rate * t ** 2) * np.sin(2 * np.pi * f * t + phi) + C


def _linear_amplitudes(t, y, f, T2):
    env = np.exp(-(t / T2) ** 2)
    design = np.column_stack([env * np.sin(2 * np.pi * f * t), env * np.cos(2 * np.pi * f * t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return coef, float(resid @ resid)


def _seed_frequency(t, y, T2, pad=16):
    """FFT peak of the zero-padded trace, refined on a sub-bin grid."""
    dt = np.median(np.diff(t))
    n = pad * t.size
    spectrum = np.abs(np.fft.rfft(y - y.mean(), n=n))
    freqs = np.fft.rfftfreq(n, d=dt)
    spectrum[0] = 0.0
    peak = float(freqs[np.argmax(spectrum)])
    bin_width = freqs[1]
    candidates = np.clip(peak + np.linspace(-bin_width, bin_width, 101), 0.0, None)
    costs = [_linear_amplitudes(t, y, f, T2)[1] for f in candidates]
    return float(candidates[int(np.argmin(costs))])


def fit_gaussian_decay(t, y):
    """
    Fit A exp(-(t/T2)^2) sin(2 pi f t + phi) + C to a Ramsey or echo trace.

    The frequency is seeded from the zero-padded FFT peak and T2 from a
    logarithmic grid solved linearly in the amplitudes; the refinement works
    in the decay rate 1/T2^2 >= 0. A rate below 1/sentinel^2 (sentinel =
    T2_SENTINEL_FACTOR times the trace span) means the decay is unresolved:
    T2 is reported at the sentinel and `t2_unbounded` is set.

    Units follow the inputs (t in us gives f in MHz and T2 in us).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 5 or t.size != y.size:
        raise ValidationError("Decay fit needs at least five samples", [f"n: {t.size}"])
    span = float(np.ptp(t))
    sentinel = T2_SENTINEL_FACTOR * span

    f0 = _seed_frequency(t, y, sentinel)
    grid = np.logspace(np.log10(span / 20.0), np.log10(sentinel), 241)
    best = int(np.argmin([_linear_amplitudes(t, y, f0, T2)[1] for T2 in grid]))
    T2_0 = float(grid[best])
    (a, b, C0), _ = _linear_amplitudes(t, y, f0, T2_0)
    p0 = [float(np.hypot(a, b)), f0, float(np.arctan2(b, a)), float(C0),
          0.0 if best == grid.size - 1 else 1.0 / T2_0 ** 2]

    try:
        popt, pcov = curve_fit(
            _decay_by_rate, t, y, p0=p0,
            bounds=([-np.inf, 0.0, -np.inf, -np.inf, 0.0], [np.inf, np.inf, np.inf, np.inf, np.inf]),
            maxfev=20000,
        )
    except RuntimeError as e:
        raise FitError(f"Gaussian decay fit did not converge: {e}", {"f0": f0, "T2_0": T2_0})

    A, f, phi, C, rate = (float(v) for v in popt)
    if A < 0:
        A, phi = -A, phi + np.pi
    stderr = np.sqrt(np.clip(np.diag(pcov), 0, None))
    unbounded = rate <= 1.0 / sentinel ** 2
    if unbounded:
        T2, T2_err = sentinel, float("inf")
        logging.warning(f"Decay unresolved over a span of {span:.4g}; T2 reported at sentinel {sentinel:.4g}")
    else:
        T2 = rate ** -0.5
        T2_err = 0.5 * rate ** -1.5 * float(stderr[4])
    return {
        "amplitude": A,
        "frequency": f,
        "phase": float(np.mod(phi, 2 * np.pi)),
        "offset": C,
        "T2": float(T2),
        "stderr": {"amplitude": float(stderr[0]), "frequency": float(stderr[1]),
                   "offset": float(stderr[3]), "T2": T2_err},
        "t2_unbounded": bool(unbounded),
    }
