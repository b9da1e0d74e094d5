# data/io.py

import os
import json
import hashlib
import logging
import numpy as np
import pandas as pd
import yaml

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))


def resolve_path(path):
    """Paths that are not absolute are taken relative to the project root."""
    if not os.path.isabs(path):
        path = os.path.join(PROJECT_ROOT, path)
    return path


def _to_builtin(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, pd.DataFrame):
        return obj.to_dict(orient="records")
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def dumps(payload):
    return json.dumps(payload, indent=2, sort_keys=True, default=_to_builtin)


def to_plain(payload):
    """Plain JSON types; NaN and infinities become None."""
    return json.loads(dumps(payload), parse_constant=lambda _: None)


def _atomic_write(path, write):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    temp_path = path + ".tmp"
    write(temp_path)
    os.replace(temp_path, path)


def save_csv(df, csv_path):
    """
    Atomically write a DataFrame to CSV.

    Args:
        df: DataFrame to save
        csv_path: Destination path
    """
    try:
        _atomic_write(csv_path, lambda tmp: df.to_csv(tmp, index=False))
        logging.info(f"Saved {len(df)} rows to {csv_path}")
    except Exception as e:
        logging.error(f"Failed to save {csv_path}: {e}")
        raise


def save_json(payload, json_path):
    text = dumps(payload)

    def write(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")

    try:
        _atomic_write(json_path, write)
        logging.info(f"Saved report to {json_path}")
    except Exception as e:
        logging.error(f"Failed to save {json_path}: {e}")
        raise


def read_csv(csv_path, required_cols=None):
    """
    Read a CSV file and check that the expected columns are present.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: If required columns are missing
    """
    csv_path = resolve_path(csv_path)
    if not os.path.exists(csv_path):
        raise FileNotFoundError(f"Data file not found: {csv_path}")

    df = pd.read_csv(csv_path)
    if required_cols:
        missing_cols = [col for col in required_cols if col not in df.columns]
        if missing_cols:
            raise ValueError(f"Missing required columns in {csv_path}: {missing_cols}")
    return df


def read_yaml(path):
    path = resolve_path(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return yaml.safe_load(fh) or {}


def _merge(base, override):
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path):
    """
    Load a YAML scenario config, resolving its `include:` list.

    YAML includes are merged underneath the including document. CSV includes
    (voltage tables) are attached as a list of row records under
    `voltage_table`. Include paths are relative to the including file.
    """
    path = resolve_path(path)
    doc = read_yaml(path)
    includes = doc.pop("include", []) or []
    if isinstance(includes, str):
        includes = [includes]

    base = {}
    for item in includes:
        inc_path = item if os.path.isabs(item) else os.path.join(os.path.dirname(path), item)
        if inc_path.endswith(".csv"):
            base["voltage_table"] = read_csv(inc_path).to_dict(orient="records")
        else:
            base = _merge(base, load_config(inc_path))
    return _merge(base, doc)


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_sha256(config):
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_to_builtin)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
