# readout/confusion.py

import json
import logging
from dataclasses import dataclass
from functools import reduce
import numpy as np

from backend.config import CONFUSION_MATRIX
from backend.errors import NumericalError, ValidationError
from data.io import resolve_path

CONFUSION_FIXTURE = "data/fixtures/confusion_matrix.json"

_confusion = None


@dataclass(frozen=True)
class ConfusionMatrix:
    """Column-stochastic readout matrix, M[measured][prepared]."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        errors = []
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            errors.append(f"shape: expected square, got {M.shape}")
        else:
            if np.any(M < 0) or np.any(M > 1):
                errors.append("entries: must lie in [0, 1]")
            if not np.allclose(M.sum(axis=0), 1.0, atol=1e-12):
                errors.append(f"columns: sums {M.sum(axis=0).tolist()} differ from 1")
        if errors:
            raise ValidationError("Invalid confusion matrix", errors)
        object.__setattr__(self, "matrix", M)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def tensor(self, n):
        """Confusion matrix of n independently read bits."""
        return ConfusionMatrix(reduce(np.kron, [self.matrix] * n))


def _as_matrix(M):
    if M is None:
        return get_confusion_matrix()
    return M if isinstance(M, ConfusionMatrix) else ConfusionMatrix(M)


def load_confusion_matrix(path=CONFUSION_FIXTURE):
    with open(resolve_path(path)) as f:
        payload = json.load(f)
    return ConfusionMatrix(payload["matrix"])


def get_confusion_matrix():
    global _confusion
    if _confusion is None:
        try:
            _confusion = load_confusion_matrix()
        except FileNotFoundError:
            logging.warning(f"{CONFUSION_FIXTURE} missing; using CONFUSION_MATRIX from config")
            _confusion = ConfusionMatrix(CONFUSION_MATRIX)
    return _confusion


def _check_probs(p, dim):
    p = np.asarray(p, dtype=float)
    if p.shape != (dim,):
        raise ValidationError(f"Probability vector must have length {dim}", [f"shape: {p.shape}"])
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError("Probabilities must be non-negative and sum to one", [f"p: {p.tolist()}"])
    return p


def apply_confusion(true_probs, M=None):
    """Measured distribution M p for a prepared distribution p."""
    M = _as_matrix(M)
    p = _check_probs(true_probs, M.dim)
    return M.matrix @ p


def correct_readout(measured_probs, M=None):
    """
    Undo readout errors: M^-1 p, clamped to [0, 1] and renormalized.

    Returns:
        dict with `probabilities` and `clamped` (True when the inversion left
        the simplex and clamping was needed)

    Raises:
        NumericalError: If M is singular
    """
    M = _as_matrix(M)
    p = np.asarray(measured_probs, dtype=float)
    if p.shape != (M.dim,):
        raise ValidationError(f"Probability vector must have length {M.dim}", [f"shape: {p.shape}"])
    if abs(np.linalg.det(M.matrix)) < 1e-12:
        raise NumericalError("Confusion matrix is singular and cannot be inverted")

    corrected = np.linalg.solve(M.matrix, p)
    clamped = bool(np.any(corrected < -1e-12) or np.any(corrected > 1 + 1e-12))
    if clamped:
        logging.warning(f"Readout correction left the simplex: {np.round(corrected, 4).tolist()}; clamping")
        corrected = np.clip(corrected, 0.0, 1.0)
        total = corrected.sum()
        corrected = corrected / total if total > 0 else np.full(M.dim, 1.0 / M.dim)
    return {"probabilities": corrected, "clamped": clamped}


def parity_readout_fidelity(P1, P0):
    """Average parity readout fidelity (P1 + P0) / 2."""
    return float((P1 + P0) / 2.0)
