"""Flat-file result persistence: CSV artifacts, manifests, and output locks.

Floats are written with repr so every estimate file re-ingests bit-exactly;
all files are UTF-8 with '.' decimals regardless of locale.
"""

from __future__ import annotations

import csv
import json
import os
import platform
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .engine import MixingVector, SupportSet
from .errors import ConfigError, DataFormatError

LOCK_NAME = ".prmix.lock"


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, fieldnames, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            if isinstance(row, dict):
                writer.writerow([_fmt(row[k]) for k in fieldnames])
            else:
                writer.writerow([_fmt(v) for v in row])
    return path


def write_estimate(path, mixing: MixingVector) -> Path:
    return write_csv(path, ["support", "weight"],
                     zip(mixing.support.points, mixing.weights))


def read_estimate(path) -> MixingVector:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(path, None, "estimate file not found")
    points, weights = [], []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["support", "weight"]:
            raise DataFormatError(path, 1, f"unexpected header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                points.append(float(row[0]))
                weights.append(float(row[1]))
            except (IndexError, ValueError):
                raise DataFormatError(path, line_no, f"bad estimate row {row!r}") from None
    if not points:
        raise DataFormatError(path, None, "estimate file has no rows")
    return MixingVector(SupportSet(points), weights)


def write_manifest(out_dir, config: dict, wall_time_s: float, extra: dict | None = None) -> Path:
    import numpy
    import scipy

    from . import __version__

    manifest = {
        "config": config,
        "wall_time_s": wall_time_s,
        "versions": {
            "prmix": __version__,
            "python": sys.version.split()[0],
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "platform": platform.platform(),
        },
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


@contextmanager
def output_lock(out_dir):
    """One process per output directory; concurrent runs fail fast."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock} if that run is gone)") from None
    try:
        os.write(fd, f"pid={os.getpid()} time={time.time()}\n".encode())
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)
