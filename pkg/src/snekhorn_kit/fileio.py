"""CSV and JSON file handling for the command line front end.

Matrices travel as headerless CSV with 17 significant digits, which
round-trips float64 exactly.  All writes go through a temp file and an
atomic rename.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np


def _atomic_write(path, writer):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix_csv(path, M, meta: dict | None = None):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))

    def writer(fh):
        np.savetxt(fh, M, fmt="%.17g", delimiter=",", newline="\n")

    _atomic_write(path, writer)
    if meta is not None:
        write_json(os.fspath(path) + ".meta.json",
                   {"shape": list(M.shape), **meta})


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)


def write_labels_csv(path, labels):
    labels = np.asarray(labels).ravel()

    def writer(fh):
        for value in labels:
            fh.write(f"{int(value)}\n")

    _atomic_write(path, writer)


def read_labels_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=1)


def write_text(path, text: str):
    _atomic_write(path, lambda fh: fh.write(text))


def write_json(path, payload: dict):
    def writer(fh):
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonify)
        fh.write("\n")

    _atomic_write(path, writer)


def _jsonify(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value)!r}")
