"""Embedding matrices and their on-disk interchange formats.

The binary format is deliberately dumb: a 24-byte little-endian header
(magic ``CREM``, version, dtype code, n, d) followed by the row-major
float64 payload. The CSV flavour exists for spreadsheets and debugging;
values are written with ``repr`` so they survive a round trip exactly.
"""

from __future__ import annotations

import csv
import io
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    FormatError,
    IoError,
    ParamError,
    SensitivityError,
    TruncationError,
)

MAGIC = b"CREM"
FORMAT_VERSION = 1
DTYPE_F64 = 2
HEADER = struct.Struct("<4sHHQQ")

# Rows whose norm is within this relative tolerance of the radius count as
# inside the ball; this is what makes clipping exactly idempotent.
CLIP_REL_TOL = 1e-9

_FLOAT_TOKEN = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_NONFINITE_TOKEN = re.compile(r"^[+-]?(nan|inf|infinity)$", re.IGNORECASE)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """An immutable n x d float64 matrix of row embeddings.

    ``clip_radius`` records the l2 ball the rows are known to live in, or
    ``None`` when no such promise has been made. The backing array is made
    read-only at construction.
    """

    values: np.ndarray
    label: str = ""
    clip_radius: float | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ParamError(f"embedding matrix must be 2-d, got ndim={arr.ndim}")
        n, d = arr.shape
        if n < 1 or d < 1:
            raise ParamError(f"embedding matrix needs n >= 1 and d >= 1, got {n} x {d}")
        if not np.all(np.isfinite(arr)):
            raise DataError("embedding matrix contains non-finite entries")
        if self.clip_radius is not None:
            r = float(self.clip_radius)
            if not np.isfinite(r) or r <= 0.0:
                raise ParamError(f"clip_radius must be a positive real, got {r!r}")
            norms = np.linalg.norm(arr, axis=1)
            if np.any(norms > r * (1.0 + CLIP_REL_TOL)):
                worst = float(norms.max())
                raise SensitivityError(
                    f"row norm {worst:.17g} exceeds declared clip radius {r:.17g}"
                )
        arr = arr.copy() if arr is self.values else arr
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return int(self.values.shape[1])


def clip_embeddings(m: EmbeddingMatrix, radius: float) -> EmbeddingMatrix:
    """Scale every row onto the l2 ball of the given radius.

    Rows already inside the ball (up to the idempotence tolerance) are left
    bit-for-bit untouched, so clipping an already-clipped matrix at the same
    radius is the identity.
    """
    r = float(radius)
    if not np.isfinite(r) or r <= 0.0:
        raise ParamError(f"clip radius must be a positive real, got {radius!r}")
    values = np.array(m.values, dtype=np.float64)
    norms = np.linalg.norm(values, axis=1)
    outside = norms > r * (1.0 + CLIP_REL_TOL)
    if np.any(outside):
        values[outside] *= (r / norms[outside])[:, None]
    return EmbeddingMatrix(values=values, label=m.label, clip_radius=r)


def _format_of(path: Path, fmt: str) -> str:
    if fmt not in ("binary", "csv", "auto"):
        raise ParamError(f"unknown format {fmt!r}; expected binary, csv or auto")
    if fmt != "auto":
        return fmt
    try:
        with open(path, "rb") as fh:
            head = fh.read(4)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return "binary" if head == MAGIC else "csv"


def save_embeddings(m: EmbeddingMatrix, path: str | Path, fmt: str = "binary") -> None:
    """Write a matrix in the requested format (``binary`` or ``csv``)."""
    if fmt not in ("binary", "csv"):
        raise ParamError(f"unknown format {fmt!r}; expected binary or csv")
    path = Path(path)
    try:
        if fmt == "binary":
            with open(path, "wb") as fh:
                fh.write(HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_F64, m.n, m.d))
                fh.write(np.ascontiguousarray(m.values, dtype="<f8").tobytes())
        else:
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([f"dim_{j}" for j in range(m.d)])
                for row in m.values:
                    writer.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_embeddings(path: str | Path, fmt: str = "auto") -> EmbeddingMatrix:
    """Read a matrix back; ``auto`` sniffs the magic bytes."""
    path = Path(path)
    fmt = _format_of(path, fmt)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if fmt == "binary":
        values = _parse_binary(raw, str(path))
    else:
        values = _parse_csv(raw, str(path))
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: payload contains non-finite entries")
    return EmbeddingMatrix(values=values, label=str(path))


def _parse_binary(raw: bytes, name: str) -> np.ndarray:
    if len(raw) < HEADER.size:
        raise FormatError(f"{name}: file shorter than the {HEADER.size}-byte header")
    magic, version, dtype_code, n, d = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{name}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{name}: unsupported version {version}")
    if dtype_code != DTYPE_F64:
        raise FormatError(f"{name}: unsupported dtype code {dtype_code}")
    if n < 1 or d < 1:
        raise FormatError(f"{name}: header declares empty matrix {n} x {d}")
    expected = HEADER.size + n * d * 8
    if len(raw) != expected:
        raise TruncationError(
            f"{name}: payload is {len(raw) - HEADER.size} bytes, "
            f"header declares {n * d * 8}"
        )
    values = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).astype(
        np.float64, copy=True
    )
    return values.reshape(n, d)


def _parse_csv(raw: bytes, name: str) -> np.ndarray:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{name}: not valid UTF-8 text") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{name}: empty CSV file") from None
    d = len(header)
    if header != [f"dim_{j}" for j in range(d)]:
        raise FormatError(f"{name}: header must be dim_0,...,dim_{{d-1}}, got {header!r}")
    rows: list[list[float]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != d:
            raise TruncationError(
                f"{name}:{lineno}: row has {len(row)} fields, header declares {d}"
            )
        parsed = []
        for token in row:
            token = token.strip()
            if _NONFINITE_TOKEN.match(token):
                raise DataError(f"{name}:{lineno}: non-finite entry {token!r}")
            if not _FLOAT_TOKEN.match(token):
                raise FormatError(f"{name}:{lineno}: cannot parse {token!r} as a real")
            parsed.append(float(token))
        rows.append(parsed)
    if not rows:
        raise FormatError(f"{name}: no data rows")
    return np.array(rows, dtype=np.float64)
