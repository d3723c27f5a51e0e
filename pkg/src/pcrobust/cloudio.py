"""Point-cloud file formats.

Two interchange formats:

* text "XYZ": one point per line, three decimal floats separated by
  whitespace; an optional ``# label <int>`` header line carries the class id.
* binary "RPC1": magic bytes ``RPC1``, little-endian u32 point count,
  u32 label flag (0/1), N x 3 little-endian f32 coordinates, then a u32
  label when the flag is set.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .geometry import PointCloud

MAGIC = b"RPC1"


def write_xyz(cloud: PointCloud, path) -> None:
    lines = []
    if cloud.label is not None:
        lines.append(f"# label {cloud.label}")
    for x, y, z in cloud.points:
        lines.append(f"{float(x)!r} {float(y)!r} {float(z)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_xyz(path) -> PointCloud:
    label = None
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = line[1:].split()
            if len(fields) == 2 and fields[0] == "label":
                label = int(fields[1])
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"expected 3 coordinates per line, got: {line!r}")
        rows.append([float(v) for v in parts])
    if not rows:
        raise ValueError(f"no points found in {path}")
    return PointCloud(np.array(rows), label)


def write_binary(cloud: PointCloud, path) -> None:
    has_label = cloud.label is not None
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", cloud.n, 1 if has_label else 0))
        fh.write(cloud.points.astype("<f4").tobytes())
        if has_label:
            fh.write(struct.pack("<I", cloud.label))


def read_binary(path) -> PointCloud:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    n, label_flag = struct.unpack_from("<II", raw, 4)
    offset = 12
    pts = np.frombuffer(raw, dtype="<f4", count=n * 3, offset=offset)
    pts = pts.reshape(n, 3).astype(np.float64)
    offset += n * 3 * 4
    label = None
    if label_flag:
        (label,) = struct.unpack_from("<I", raw, offset)
    return PointCloud(pts, label)


def read_cloud(path) -> PointCloud:
    """Dispatch on content: binary when the magic matches, XYZ text otherwise."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_binary(path)
    return read_xyz(path)


def write_cloud(cloud: PointCloud, path) -> None:
    """Dispatch on extension: .xyz/.txt write text, everything else binary."""
    if str(path).endswith((".xyz", ".txt")):
        write_xyz(cloud, path)
    else:
        write_binary(cloud, path)
