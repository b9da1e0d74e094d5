# exchange/fitting.py

import logging
import numpy as np
from scipy.optimize import curve_fit

from backend.errors import FitError, ValidationError
from exchange.models import j_logistic


def fit_exponential(v_mV, J_Hz):
    """
    Fit J = J_0 exp(v / v_0) by linear least squares on ln J.

    Points with J <= 0 are ignored.

    Returns:
        dict with J_0 (Hz), v_0 (mV), residual (rms of ln J) and n_points
    """
    v = np.asarray(v_mV, dtype=float)
    j = np.asarray(J_Hz, dtype=float)
    keep = j > 0
    if keep.sum() < 2 or np.ptp(v[keep]) == 0:
        raise ValidationError("Exponential fit needs at least two distinct offsets with J > 0")

    slope, intercept = np.polyfit(v[keep], np.log(j[keep]), 1)
    if slope <= 0:
        raise FitError("Exchange does not grow with the barrier offset", {"slope": float(slope)})
    resid = np.log(j[keep]) - (slope * v[keep] + intercept)
    result = {
        "J_0": float(np.exp(intercept)),
        "v_0": float(1.0 / slope),
        "residual": float(np.sqrt(np.mean(resid ** 2))),
        "n_points": int(keep.sum()),
    }
    logging.info(f"Exponential exchange fit: J_0={result['J_0']:.4g} Hz | v_0={result['v_0']:.3f} mV")
    return result


def fit_saturating(c, J_Hz):
    """Logistic fit J_max / (1 + exp(-(c - c_0) / w)) by nonlinear least squares."""
    c = np.asarray(c, dtype=float)
    j = np.asarray(J_Hz, dtype=float)
    if c.size < 4:
        raise ValidationError("Saturating fit needs at least four points")

    scale = float(j.max())
    if scale <= 0:
        raise ValidationError("Saturating fit needs some J > 0")
    c0 = float(c[np.argmin(np.abs(j - scale / 2))])
    w0 = max(np.ptp(c) / 10, 1e-3)
    # fit in units of the largest sample
    try:
        popt, pcov = curve_fit(
            j_logistic, c, j / scale, p0=[1.0, c0, w0],
            bounds=([0.0, -np.inf, 1e-6], [np.inf, np.inf, np.inf]),
            maxfev=20000,
        )
    except RuntimeError as e:
        raise FitError(f"Saturating exchange fit did not converge: {e}", {"p0": [scale, c0, w0]})

    stderr = np.sqrt(np.diag(pcov)) * np.array([scale, 1.0, 1.0])
    result = {
        "J_max": float(popt[0] * scale),
        "c_0": float(popt[1]),
        "w": float(popt[2]),
        "stderr": [float(s) for s in stderr],
    }
    logging.info(f"Saturating exchange fit: J_max={result['J_max']:.4g} Hz | c_0={result['c_0']:.3f} | w={result['w']:.3f}")
    return result
