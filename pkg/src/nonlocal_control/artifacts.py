"""CSV and binary serialization of solver outputs.

CSV numbers are written with 17 significant digits so values round-trip
exactly. The binary trajectory dump is: 8-byte magic b"NLTRAJ01", two
little-endian uint64 dims (rows, cols), then row-major little-endian float64.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = [
    "write_vector_csv",
    "read_vector_csv",
    "write_columns_csv",
    "write_trajectory_csv",
    "write_trajectory_bin",
    "read_trajectory_bin",
]

MAGIC = b"NLTRAJ01"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_vector_csv(path: str | Path, x: np.ndarray, values: np.ndarray,
                     value_name: str = "value") -> None:
    lines = [f"x,{value_name}"]
    lines += [f"{_fmt(a)},{_fmt(b)}" for a, b in zip(x, values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vector_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    rows = Path(path).read_text().strip().splitlines()[1:]
    data = np.array([[float(s) for s in r.split(",")] for r in rows])
    return data[:, 0], data[:, 1]


def write_columns_csv(path: str | Path, header: list[str],
                      columns: list[np.ndarray]) -> None:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(_fmt(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_trajectory_csv(path: str | Path, centers: np.ndarray,
                         rows: np.ndarray, times: np.ndarray) -> None:
    """Header is t,x_0,...,x_P; each data line is one saved time level."""
    lines = ["t," + ",".join(_fmt(x) for x in centers)]
    for t, row in zip(times, rows):
        lines.append(_fmt(float(t)) + "," + ",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_trajectory_bin(path: str | Path, rows: np.ndarray) -> None:
    rows = np.ascontiguousarray(rows, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", rows.shape[0], rows.shape[1]))
        fh.write(rows.tobytes())


def read_trajectory_bin(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    n, m = struct.unpack("<QQ", raw[8:24])
    return np.frombuffer(raw[24:], dtype="<f8").reshape(n, m).copy()
