"""Dataset files and tabular result output.

Tables are CSV with "#"-prefixed header lines echoing the run configuration,
or a single JSON document {"config": ..., "rows": [...]}.
"""

import csv
import datetime
import io
import json
import struct
import sys
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

SEMD_MAGIC = b"SEMD"


def write_dataset_csv(path, X):
    X = np.asarray(X, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(X.shape[1])])
        for row in X:
            w.writerow([repr(float(v)) for v in row])


def read_dataset_csv(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise InvalidInputError(f"{path}: empty dataset file")
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    if header != [f"x{k + 1}" for k in range(len(header))]:
        raise InvalidInputError(f"{path}: expected header x1,...,xd, got {','.join(header)}")
    try:
        X = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: non-numeric entry ({exc})") from None
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] != len(header):
        raise InvalidInputError(f"{path}: ragged or empty sample rows")
    return X


def write_semd(path, X):
    """Binary columnar layout: magic, little-endian u32 n, u32 d, f64 column-major."""
    X = np.asarray(X, dtype="<f8")
    n, d = X.shape
    with open(path, "wb") as fh:
        fh.write(SEMD_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(np.asfortranarray(X).T.tobytes())


def read_semd(path):
    raw = Path(path).read_bytes()
    if raw[:4] != SEMD_MAGIC or len(raw) < 12:
        raise InvalidInputError(f"{path}: not a SEMD file")
    n, d = struct.unpack("<II", raw[4:12])
    body = np.frombuffer(raw, dtype="<f8", offset=12)
    if body.size != n * d:
        raise InvalidInputError(f"{path}: expected {n * d} values, found {body.size}")
    return body.reshape(d, n).T.astype(float)


def read_dataset(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
    return read_semd(path) if magic == SEMD_MAGIC else read_dataset_csv(path)


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def header_lines(config, timestamp=True):
    lines = [f"# config: {json.dumps(_jsonable(config), sort_keys=True)}"]
    if timestamp:
        now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        lines.append(f"# generated: {now}")
    return lines


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_table(columns, rows, config, fmt="csv", timestamp=True):
    if fmt == "json":
        doc = {"config": _jsonable(config),
               "rows": [dict(zip(columns, _jsonable(list(r)))) for r in rows]}
        if timestamp:
            doc["generated"] = datetime.datetime.now(datetime.timezone.utc).isoformat(
                timespec="seconds")
        return json.dumps(doc, indent=1, default=str) + "\n"
    if fmt != "csv":
        raise InvalidInputError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    for ln in header_lines(config, timestamp):
        buf.write(ln + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def emit(text, out=None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def read_table(path):
    """Parse a CSV written by ``render_table``: (config dict, column names, rows of str)."""
    config = {}
    body = []
    for ln in Path(path).read_text().splitlines():
        if ln.startswith("# config: "):
            config = json.loads(ln[len("# config: "):])
        elif ln and not ln.startswith("#"):
            body.append(ln)
    rows = list(csv.reader(body))
    return config, rows[0], rows[1:]
