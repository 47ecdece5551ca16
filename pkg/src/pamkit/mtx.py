"""Matrix Market coordinate files for PAMs and kernel matrices.

Written by hand rather than through ``scipy.io`` because exact-mode PAM
values are arbitrary-precision integers.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError
from .pam import PamMatrix, _coo_to_csr


def _fmt_real(v: float) -> str:
    return repr(float(v))


def write_pam(matrix: PamMatrix, path, comment: str | None = None) -> None:
    field = "integer" if matrix.scalar == "int" else "real"
    fmt = str if matrix.scalar == "int" else _fmt_real
    rows = np.repeat(np.arange(matrix.n), np.diff(matrix.indptr))
    with Path(path).open("w", encoding="ascii", newline="\n") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {field} general\n")
        fh.write(f"% pamkit hop={matrix.hop} aggregation={matrix.aggregation} triangular={int(matrix.triangular)}\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{matrix.n} {matrix.n} {matrix.nnz}\n")
        for r, c, v in zip(rows.tolist(), matrix.indices.tolist(), matrix.data.tolist()):
            fh.write(f"{r + 1} {c + 1} {fmt(v)}\n")


def read_pam(path, aggregation: str | None = None, hop: int | None = None) -> PamMatrix:
    path = Path(path)
    meta = {}
    with path.open(encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "%%MatrixMarket" or header[2] != "coordinate":
            raise ParseError("not a Matrix Market coordinate file", path, 1)
        field, symmetry = header[3], header[4]
        if field not in ("integer", "real") or symmetry not in ("general", "symmetric"):
            raise ParseError(f"unsupported field/symmetry {field}/{symmetry}", path, 1)
        lineno = 1
        for line in fh:
            lineno += 1
            if line.startswith("%"):
                for token in line[1:].split():
                    if "=" in token:
                        k, v = token.split("=", 1)
                        meta[k] = v
                continue
            if line.strip():
                break
        n_rows, n_cols, nnz = (int(x) for x in line.split())
        if n_rows != n_cols:
            raise ParseError("PAMs are square", path, lineno)
        rows, cols, vals = [], [], []
        conv = int if field == "integer" else float
        for line in fh:
            lineno += 1
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise ParseError("expected 'row col value'", path, lineno)
            r, c = int(parts[0]) - 1, int(parts[1]) - 1
            v = conv(parts[2])
            rows.append(r)
            cols.append(c)
            vals.append(v)
            if symmetry == "symmetric" and r != c:
                rows.append(c)
                cols.append(r)
                vals.append(v)
    expected = nnz if symmetry == "general" else None
    if expected is not None and len(vals) != expected:
        raise ParseError(f"header announces {nnz} entries, found {len(vals)}", path)
    data = np.empty(len(vals), dtype=object if field == "integer" else np.float64)
    data[:] = vals
    indptr, indices, data = _coo_to_csr(n_rows, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), data)
    return PamMatrix(
        n_rows,
        indptr,
        indices,
        data,
        "int" if field == "integer" else "float",
        aggregation or meta.get("aggregation", "product"),
        hop or int(meta.get("hop", 1)),
        triangular=meta.get("triangular", "0") == "1",
    )


def write_symmetric_dense(values: np.ndarray, path, comment: str | None = None) -> None:
    """Lower triangle of a symmetric real matrix, Matrix Market ``symmetric``."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    rows, cols = np.tril_indices(n)
    keep = values[rows, cols] != 0
    with Path(path).open("w", encoding="ascii", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{n} {n} {int(keep.sum())}\n")
        for r, c in zip(rows[keep].tolist(), cols[keep].tolist()):
            fh.write(f"{r + 1} {c + 1} {_fmt_real(values[r, c])}\n")
