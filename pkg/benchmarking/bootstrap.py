# benchmarking/bootstrap.py

import logging
import numpy as np
import pandas as pd
from scipy.stats import bootstrap as scipy_bootstrap

from backend.config import BOOTSTRAP_RESAMPLES
from backend.errors import FitError, ValidationError
from benchmarking.fitting import fit_rb
from benchmarking.rb import summarize_records
from data.random_streams import stream


def bootstrap(estimator, records, resamples=BOOTSTRAP_RESAMPLES, seed=0, key="bootstrap"):
    """
    Nonparametric bootstrap standard deviation of estimator(records).

    Records are resampled by row with replacement; the estimator receives a
    resampled array (or DataFrame) of the same kind it was given.

    Args:
        estimator: callable mapping records to a float
        records: array-like or DataFrame, one record per row
        resamples: number of bootstrap replicas (>= 100)
        seed: seed of the resampling stream

    Returns:
        Standard deviation of the bootstrap distribution
    """
    if resamples < 100:
        raise ValidationError("Bootstrap needs at least 100 resamples", [f"resamples: {resamples}"])
    data = records if isinstance(records, pd.DataFrame) else np.asarray(records)
    n = len(data)

    def statistic(idx):
        idx = np.asarray(idx, dtype=int)
        return estimator(data.iloc[idx] if isinstance(data, pd.DataFrame) else data[idx])

    res = scipy_bootstrap(
        (np.arange(n),), statistic, n_resamples=resamples, method="percentile",
        vectorized=False, rng=stream(seed, key),
    )
    dist = np.asarray(res.bootstrap_distribution, dtype=float)
    if np.isnan(dist).any():
        logging.warning(f"Bootstrap: {int(np.isnan(dist).sum())} of {dist.size} replicas failed")
    return float(np.nanstd(dist, ddof=1))


def bootstrap_fit(records, resamples=BOOTSTRAP_RESAMPLES, seed=0, parameter="p"):
    """Bootstrap sigma of a fitted RB parameter, resampling sequences."""

    def estimator(sample):
        try:
            return fit_rb(summarize_records(sample))[parameter]
        except (FitError, ValidationError):
            return np.nan

    sigma = bootstrap(estimator, records, resamples, seed, key="bootstrap-rb")
    logging.info(f"Bootstrap sigma of {parameter}: {sigma:.3g} ({resamples} resamples)")
    return sigma
