"""Matrix file formats.

CSV: one row per line, ``.`` decimal, comma separated, no header.
RPKM: ``b"RPKM"``, rows (u32 LE), cols (u32 LE), then rows*cols float64 LE
row-major. Reading autodetects the format from the magic bytes.
"""
import struct
from pathlib import Path

import numpy as np

from .errors import MatrixFileError

MATRIX_MAGIC = b"RPKM"
KEY_MAGIC = b"RPKK"
_HDR = struct.Struct("<4sII")


def encode_matrix(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    rows, cols = a.shape
    return _HDR.pack(MATRIX_MAGIC, rows, cols) + a.tobytes()


def decode_matrix(buf, path="<bytes>", offset=0):
    """Parse one RPKM block from ``buf`` starting at ``offset``.

    Returns ``(matrix, next_offset)``.
    """
    if len(buf) - offset < _HDR.size:
        raise MatrixFileError(path, "truncated RPKM header", f"byte {len(buf)}")
    magic, rows, cols = _HDR.unpack_from(buf, offset)
    if magic != MATRIX_MAGIC:
        raise MatrixFileError(path, f"bad magic {magic!r}", f"byte {offset}")
    if rows == 0 or cols == 0:
        raise MatrixFileError(path, f"empty shape {rows}x{cols}", f"byte {offset + 4}")
    start = offset + _HDR.size
    need = rows * cols * 8
    if len(buf) - start < need:
        raise MatrixFileError(path, f"expected {need} payload bytes for {rows}x{cols}, "
                              f"found {len(buf) - start}", f"byte {len(buf)}")
    data = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=start).reshape(rows, cols)
    bad = np.flatnonzero(~np.isfinite(data.ravel()))
    if bad.size:
        raise MatrixFileError(path, "non-finite value", f"byte {start + 8 * int(bad[0])}")
    return data.astype(np.float64), start + need


def _parse_csv(text, path):
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError as exc:
            raise MatrixFileError(path, f"unparseable value ({exc})", f"line {lineno}") from None
        if not np.isfinite(row).all():
            raise MatrixFileError(path, "non-finite value", f"line {lineno}")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise MatrixFileError(path, f"expected {width} columns, found {len(row)}", f"line {lineno}")
        rows.append(row)
    if not rows:
        raise MatrixFileError(path, "no data rows", "line 1")
    return np.array(rows, dtype=np.float64)


def read_matrix(path):
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise MatrixFileError(path, exc.strerror or str(exc)) from None
    if buf[:4] == MATRIX_MAGIC:
        mat, end = decode_matrix(buf, path)
        if end != len(buf):
            raise MatrixFileError(path, "trailing bytes after matrix payload", f"byte {end}")
        return mat
    try:
        text = buf.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MatrixFileError(path, "not RPKM and not ASCII CSV", f"byte {exc.start}") from None
    return _parse_csv(text, path)


def read_vector(path):
    """Read a single-row or single-column matrix as a 1-D array."""
    m = read_matrix(path)
    if m.shape[0] != 1 and m.shape[1] != 1:
        raise MatrixFileError(path, f"expected a vector, found shape {m.shape[0]}x{m.shape[1]}")
    return m.ravel()


def format_float(x):
    return "%.17g" % x


def write_matrix(path, a, fmt="csv"):
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    path = Path(path)
    if fmt == "rpkm":
        path.write_bytes(encode_matrix(a))
    elif fmt == "csv":
        lines = [",".join(format_float(v) for v in row) for row in a]
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


# ---------------------------------------------------------------------------
# perturbation key: "RPKK", k (u32), m (u32), sigma_r (f64), then R as RPKM

_KEY_HDR = struct.Struct("<4sIId")


def write_key(path, r, sigma_r):
    k, m = r.shape
    Path(path).write_bytes(_KEY_HDR.pack(KEY_MAGIC, k, m, float(sigma_r)) + encode_matrix(r))


def read_key(path):
    """Return ``(R, sigma_r)`` from an RPKK file."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise MatrixFileError(path, exc.strerror or str(exc)) from None
    if len(buf) < _KEY_HDR.size:
        raise MatrixFileError(path, "truncated key header", f"byte {len(buf)}")
    magic, k, m, sigma_r = _KEY_HDR.unpack_from(buf)
    if magic != KEY_MAGIC:
        raise MatrixFileError(path, f"bad magic {magic!r}", "byte 0")
    if not sigma_r > 0:
        raise MatrixFileError(path, f"sigma_r must be positive, found {sigma_r}", "byte 12")
    r, end = decode_matrix(buf, path, _KEY_HDR.size)
    if r.shape != (k, m):
        raise MatrixFileError(path, f"header says {k}x{m} but matrix is {r.shape[0]}x{r.shape[1]}",
                              f"byte {_KEY_HDR.size}")
    if end != len(buf):
        raise MatrixFileError(path, "trailing bytes after key payload", f"byte {end}")
    return r, sigma_r


# ---------------------------------------------------------------------------
# observed matrix triplets: "# n1 n2" header then "i,j,value" lines

def read_observed(path):
    """Return ``(shape, rows, cols, values)`` from a triplet CSV file."""
    path = Path(path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise MatrixFileError(path, str(exc)) from None
    shape = None
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if shape is not None:
                raise MatrixFileError(path, "duplicate shape header", f"line {lineno}")
            parts = line[1:].split()
            try:
                n1, n2 = (int(p) for p in parts)
            except ValueError:
                raise MatrixFileError(path, "shape header must be '# n1 n2'", f"line {lineno}") from None
            if n1 < 1 or n2 < 1:
                raise MatrixFileError(path, "shape must be positive", f"line {lineno}")
            shape = (n1, n2)
            continue
        if shape is None:
            raise MatrixFileError(path, "missing '# n1 n2' header before data", f"line {lineno}")
        toks = line.split(",")
        try:
            i, j, v = int(toks[0]), int(toks[1]), float(toks[2])
            if len(toks) != 3:
                raise ValueError
        except (ValueError, IndexError):
            raise MatrixFileError(path, "expected 'i,j,value'", f"line {lineno}") from None
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise MatrixFileError(path, f"location ({i}, {j}) outside shape {shape}", f"line {lineno}")
        if not np.isfinite(v):
            raise MatrixFileError(path, "non-finite value", f"line {lineno}")
        rows.append(i)
        cols.append(j)
        vals.append(v)
    if shape is None:
        raise MatrixFileError(path, "missing '# n1 n2' header", "line 1")
    return shape, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals)


def write_observed(path, shape, rows, cols, values):
    lines = [f"# {shape[0]} {shape[1]}"]
    lines += [f"{i},{j},{format_float(v)}" for i, j, v in zip(rows, cols, values)]
    Path(path).write_text("\n".join(lines) + "\n")
