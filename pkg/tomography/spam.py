# tomography/spam.py

import logging
import numpy as np
import pandas as pd

from readout.confusion import ConfusionMatrix, correct_readout, get_confusion_matrix
from tomography.qst import check_counts, outcome_labels


def _setting_keys(counts):
    return [c for c in ("prep", "basis") if c in counts.columns]


def spam_corrupt(counts, confusion=None):
    """Apply readout errors (per qubit, independent) to expected counts."""
    M = confusion if isinstance(confusion, ConfusionMatrix) else (
        ConfusionMatrix(confusion) if confusion is not None else get_confusion_matrix())
    return _transform(counts, lambda p, Mn: Mn.matrix @ p, M)


def spam_strip(counts, confusion=None):
    """
    Remove readout errors from tomography counts.

    Each (prep, basis) setting is corrected with the inverse of the per-qubit
    confusion matrix; settings where the correction had to be clamped are
    marked in the `clamped` column.
    """
    M = confusion if isinstance(confusion, ConfusionMatrix) else (
        ConfusionMatrix(confusion) if confusion is not None else get_confusion_matrix())

    def correct(p, Mn):
        out = correct_readout(p, Mn)
        return out["probabilities"], out["clamped"]

    stripped = _transform(counts, correct, M)
    n_clamped = int(stripped.groupby(_setting_keys(stripped))["clamped"].first().sum())
    if n_clamped:
        logging.warning(f"SPAM strip clamped {n_clamped} settings")
    return stripped


def _transform(counts, fn, M):
    counts = check_counts(counts)
    n = len(str(counts["outcome"].iloc[0]))
    Mn = M.tensor(n) if n > 1 else M
    labels = outcome_labels(n)
    frames = []
    for key, group in counts.groupby(_setting_keys(counts), sort=False):
        g = group.set_index("outcome").reindex(labels)
        g["count"] = g["count"].fillna(0.0)
        total = float(g["count"].sum())
        res = fn(g["count"].to_numpy(dtype=float) / total, Mn)
        probs, clamped = res if isinstance(res, tuple) else (res, False)
        g = g.reset_index()
        for col, val in zip(_setting_keys(counts), key if isinstance(key, tuple) else (key,)):
            g[col] = val
        g["count"] = probs * total
        g["clamped"] = bool(clamped)
        frames.append(g)
    out = pd.concat(frames, ignore_index=True)
    return out[_setting_keys(counts) + ["outcome", "count", "clamped"]]
