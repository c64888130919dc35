"""Readers for the scenario CSV formats.

All files are comma-separated with one header row.  Field snapshots
carry their own grid geometry in the i, j, x1, x2 columns, so surfaces
are reconstructed without any side channel.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


class DataFormatError(RuntimeError):
    """A CSV input is missing or not in the documented shape."""


def read_table(path) -> dict[str, np.ndarray]:
    """Read a header+rows CSV into named float columns."""
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"missing input file: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise DataFormatError(f"{path}: empty file")
        names = header.split(",")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) != len(names):
                raise DataFormatError(f"{path}:{lineno}: expected {len(names)} columns")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    data = np.array(rows) if rows else np.empty((0, len(names)))
    return {name: data[:, k] for k, name in enumerate(names)}


def read_field(path):
    """Reconstruct a gridded field from a snapshot file.

    Returns ``(X1, X2, V)`` as ``(n2, n1)`` arrays of cell-center
    coordinates and values.
    """
    cols = read_table(path)
    for required in ("i", "j", "x1", "x2", "value"):
        if required not in cols:
            raise DataFormatError(f"{path}: missing column {required!r}")
    i = cols["i"].astype(int)
    j = cols["j"].astype(int)
    n1, n2 = i.max(), j.max()
    if len(i) != n1 * n2:
        raise DataFormatError(f"{path}: {len(i)} rows for a {n1}x{n2} grid")
    X1 = np.empty((n2, n1))
    X2 = np.empty((n2, n1))
    V = np.empty((n2, n1))
    X1[j - 1, i - 1] = cols["x1"]
    X2[j - 1, i - 1] = cols["x2"]
    V[j - 1, i - 1] = cols["value"]
    return X1, X2, V


def latest_snapshot_tag(out_dir, stem: str) -> str:
    """Find the largest time tag among ``{stem}_t{tag}.csv`` files."""
    out_dir = Path(out_dir)
    tags = []
    for path in out_dir.glob(f"{stem}_t*.csv"):
        tag = path.name[len(stem) + 2:-4]
        try:
            tags.append((float(tag), tag))
        except ValueError:
            continue
    if not tags:
        raise DataFormatError(f"no {stem}_t*.csv files in {out_dir}")
    return max(tags)[1]
