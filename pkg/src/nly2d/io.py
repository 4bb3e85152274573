"""
Persistence: Field2D binary/CSV formats and deterministic CSV/JSON writers.

Binary layout: one ASCII header line
``NLY2D-FIELD2D T1=<g> T2=<g> n1=<int> n2=<int> d=<int>\\n`` followed by the
node values as little-endian float64 in row-major ``(i, j, component)`` order.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .grid_field import Field2D, Grid2D

MAGIC = "NLY2D-FIELD2D"


def fmt(x) -> str:
    """17 significant digits, ``.`` decimal; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return "" if x is None else str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """RFC 4180 CSV (CRLF line endings, UTF-8)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_field(field: Field2D, path) -> Path:
    g = field.grid
    header = f"{MAGIC} T1={g.T1!r} T2={g.T2!r} n1={g.n1} n2={g.n2} d={field.d}\n"
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    return path


def load_field(path) -> Field2D:
    with open(path, "rb") as fh:
        line = fh.readline().decode("ascii").split()
        if not line or line[0] != MAGIC:
            raise DomainError(f"{path} is not a field file")
        meta = dict(tok.split("=", 1) for tok in line[1:])
        g = Grid2D(float(meta["T1"]), float(meta["T2"]), int(meta["n1"]), int(meta["n2"]))
        d = int(meta["d"])
        data = np.frombuffer(fh.read(), dtype="<f8")
    expected = (g.N1 + 1) * (g.N2 + 1) * d
    if data.size != expected:
        raise DomainError(f"{path}: expected {expected} values, found {data.size}")
    return Field2D(g, data.reshape(g.N1 + 1, g.N2 + 1, d).astype(float))


def field_rows(field: Field2D, stride: int = 1):
    g = field.grid
    t1, t2 = g.t1[::stride], g.t2[::stride]
    v = field.values[::stride, ::stride]
    for i, a in enumerate(t1):
        for j, b in enumerate(t2):
            yield (a, b, *v[i, j])


def save_field_csv(field: Field2D, path, stride: int = 1) -> Path:
    header = ["t1", "t2"] + [f"v_{k + 1}" for k in range(field.d)]
    return write_csv(path, header, field_rows(field, stride))
