"""On-disk DrawStore: ``metadata.json`` plus one ``.npy`` table per parameter.

Every table is little-endian (``<f8`` or ``<i8``) with one row per stored
draw; the original per-draw shape is recorded in the metadata.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .gibbs import DrawStore, FitConfig
from .panel import CountPanel

FORMAT = "nbfts-drawstore"
VERSION = 1
_PANEL_TABLES = ("counts", "missing", "offsets")


def _table(arr):
    arr = np.asarray(arr)
    if arr.dtype.kind in "iub":
        return np.ascontiguousarray(arr, dtype="<i8")
    return np.ascontiguousarray(arr, dtype="<f8")


def save_store(store: DrawStore, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n, m = store.panel.shape
    S = store.n_draws
    tables = {}
    for name, arr in {**store.draws, "predictive": store.predictive}.items():
        arr = np.asarray(arr)
        np.save(directory / f"{name}.npy", _table(arr.reshape(S, -1)))
        tables[name] = {"dtype": _table(arr[:0]).dtype.str, "shape": list(arr.shape[1:])}
    panel = store.panel
    for name in _PANEL_TABLES:
        np.save(directory / f"panel_{name}.npy", _table(getattr(panel, name)))
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "variant": store.config.variant,
        "seed": store.config.seed,
        "n": n, "m": m, "K": store.config.K, "n_draws": S,
        "config": store.config.to_dict(),
        "year_labels": [str(y) for y in panel.year_labels],
        "week_labels": [str(w) for w in panel.week_labels],
        "tables": tables,
    }
    (directory / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return directory


def validate_store(directory) -> dict:
    """Check a DrawStore directory against its schema; returns the metadata."""
    directory = Path(directory)
    meta_path = directory / "metadata.json"
    if not meta_path.is_file():
        raise SchemaError(f"{directory}: missing metadata.json")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{meta_path}: invalid JSON ({exc})") from None
    for key in ("format", "version", "variant", "seed", "n", "m", "K", "n_draws", "config", "tables"):
        if key not in meta:
            raise SchemaError(f"{meta_path}: missing key {key!r}")
    if meta["format"] != FORMAT or meta["version"] != VERSION:
        raise SchemaError(f"{meta_path}: unsupported format {meta['format']!r} v{meta['version']}")
    n, m, K, S = meta["n"], meta["m"], meta["K"], meta["n_draws"]
    if "predictive" not in meta["tables"]:
        raise SchemaError(f"{meta_path}: no predictive table")
    expected = {"F": [m, K], "beta": [n, K], "predictive": [n, m]}
    for name, info in meta["tables"].items():
        path = directory / f"{name}.npy"
        if not path.is_file():
            raise SchemaError(f"{directory}: table {name}.npy is missing")
        arr = np.load(path, mmap_mode="r")
        if arr.dtype.str not in ("<f8", "<i8") or arr.dtype.str != info["dtype"]:
            raise SchemaError(f"{path}: dtype {arr.dtype.str} does not match {info['dtype']}")
        if arr.shape != (S, int(np.prod(info["shape"], dtype=np.int64))):
            raise SchemaError(f"{path}: shape {arr.shape} inconsistent with {S} draws of {info['shape']}")
        if name in expected and info["shape"] != expected[name]:
            raise SchemaError(f"{path}: per-draw shape {info['shape']} should be {expected[name]}")
        if not np.all(np.isfinite(arr)):
            raise SchemaError(f"{path}: non-finite values")
    if np.any(np.load(directory / "predictive.npy", mmap_mode="r") < 0):
        raise SchemaError(f"{directory}: negative predictive counts")
    for name in _PANEL_TABLES:
        if not (directory / f"panel_{name}.npy").is_file():
            raise SchemaError(f"{directory}: panel table panel_{name}.npy is missing")
    return meta


def load_store(directory) -> DrawStore:
    directory = Path(directory)
    meta = validate_store(directory)
    S = meta["n_draws"]
    arrays = {name: np.load(directory / f"{name}.npy").reshape((S, *info["shape"]))
              for name, info in meta["tables"].items()}
    predictive = arrays.pop("predictive")
    counts, missing, offsets = (np.load(directory / f"panel_{name}.npy") for name in _PANEL_TABLES)
    panel = CountPanel(counts, missing.astype(bool), offsets, list(meta.get("year_labels", [])),
                       list(meta.get("week_labels", [])))
    return DrawStore(config=FitConfig.from_dict(meta["config"]), panel=panel, draws=arrays, predictive=predictive)
