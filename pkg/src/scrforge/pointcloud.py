"""Colored point clouds: PLY ingestion, transformation, merging, spatial queries."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloud, EmptyIndex, LengthMismatch, MissingProperty, ParseError
from .geometry import RigidTransform

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


@dataclass(frozen=True)
class ColorPointCloud:
    """Point positions in meters (float32) with 8-bit RGB colors."""

    positions: np.ndarray  # (N, 3) float32
    colors: np.ndarray     # (N, 3) uint8

    def __post_init__(self) -> None:
        pos = np.ascontiguousarray(np.asarray(self.positions, dtype=np.float32).reshape(-1, 3))
        col = np.ascontiguousarray(np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3))
        if len(pos) != len(col):
            raise LengthMismatch(f"{len(pos)} positions vs {len(col)} colors")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        pos.flags.writeable = False
        col.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)

    def __len__(self) -> int:
        return len(self.positions)

    def transformed(self, transform: RigidTransform) -> "ColorPointCloud":
        """Apply a rigid transform to positions; colors unchanged."""
        moved = transform.apply(self.positions.astype(np.float64))
        return ColorPointCloud(moved.astype(np.float32), self.colors)


def merge(clouds: Sequence[ColorPointCloud],
          transforms: Sequence[RigidTransform]) -> ColorPointCloud:
    """Concatenate clouds after moving each by its transform.

    Raises:
        LengthMismatch: if the two lists differ in length.
    """
    if len(clouds) != len(transforms):
        raise LengthMismatch(f"{len(clouds)} clouds vs {len(transforms)} transforms")
    if not clouds:
        return ColorPointCloud(np.empty((0, 3), np.float32), np.empty((0, 3), np.uint8))
    moved = [c.transformed(t) for c, t in zip(clouds, transforms)]
    return ColorPointCloud(
        np.concatenate([c.positions for c in moved]),
        np.concatenate([c.colors for c in moved]),
    )


def bounding_box(cloud: ColorPointCloud) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise (min, max) over positions.

    Raises:
        EmptyCloud: on an empty cloud.
    """
    if len(cloud) == 0:
        raise EmptyCloud("bounding_box of empty cloud")
    pos = cloud.positions
    return pos.min(axis=0).astype(np.float64), pos.max(axis=0).astype(np.float64)


def voxel_downsample(cloud: ColorPointCloud, voxel_m: float = 0.005) -> ColorPointCloud:
    """Keep the first point in each voxel. Intended to speed up ICP only;
    never apply to rendering input."""
    if voxel_m <= 0:
        raise ValueError("voxel size must be positive")
    if len(cloud) == 0:
        return cloud
    keys = np.floor(cloud.positions.astype(np.float64) / voxel_m).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    first.sort()
    return ColorPointCloud(cloud.positions[first], cloud.colors[first])


class SpatialIndex:
    """Exact nearest-neighbor queries over cloud positions (balanced k-d tree)."""

    def __init__(self, cloud: ColorPointCloud, leaf_size: int = 16):
        self._positions = cloud.positions.astype(np.float64)
        self._tree = (cKDTree(self._positions, leafsize=leaf_size)
                      if len(self._positions) else None)

    def __len__(self) -> int:
        return len(self._positions)

    def nearest_neighbor(self, query) -> tuple[int, float]:
        """Index and squared distance of the closest point; ties go to the
        lowest index.

        Raises:
            EmptyIndex: if the index holds no points.
        """
        if self._tree is None:
            raise EmptyIndex("nearest_neighbor on empty index")
        q = np.asarray(query, dtype=np.float64).reshape(3)
        d, _ = self._tree.query(q)
        # re-resolve in plain numpy so ties break on the lowest index and the
        # distance matches a linear scan bit-for-bit
        radius = d * (1.0 + 1e-12) + 1e-300
        candidates = self._tree.query_ball_point(q, radius)
        candidates = np.sort(np.asarray(candidates, dtype=np.int64))
        d2 = np.sum((self._positions[candidates] - q) ** 2, axis=1)
        best = int(candidates[np.argmin(d2)])
        return best, float(d2.min())

    def query_within(self, queries: np.ndarray, max_distance: float
                     ) -> tuple[np.ndarray, np.ndarray]:
        """Batch nearest neighbors within `max_distance`.

        Returns:
            (indices, distances) arrays; index -1 marks a query with no
            neighbor inside the radius.
        """
        if self._tree is None:
            raise EmptyIndex("query_within on empty index")
        d, idx = self._tree.query(np.asarray(queries, dtype=np.float64),
                                  distance_upper_bound=max_distance)
        missing = ~np.isfinite(d)
        idx = idx.astype(np.int64)
        idx[missing] = -1
        d[missing] = np.inf
        return idx, d


def _split_header(raw: bytes):
    end = raw.find(b"end_header")
    if end < 0:
        raise ParseError("PLY header has no end_header")
    nl = raw.find(b"\n", end)
    if nl < 0:
        raise ParseError("PLY header not newline-terminated")
    header = raw[:nl].decode("ascii", errors="replace")
    return header.splitlines(), raw[nl + 1:]


def load_ply(path) -> ColorPointCloud:
    """Read a PLY file with x,y,z and red,green,blue vertex properties.

    Accepts format ascii 1.0 and binary_little_endian 1.0. Extra vertex
    properties are skipped; non-vertex elements after the vertices are
    ignored.

    Raises:
        ParseError: malformed header or truncated payload.
        MissingProperty: position or color properties absent.
    """
    raw = Path(path).read_bytes()
    if not raw.startswith(b"ply"):
        raise ParseError(f"{path}: not a PLY file")
    lines, payload = _split_header(raw)

    fmt = None
    elements = []  # (name, count, [(prop_name, dtype_code)])
    for line in lines[1:]:
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise ParseError(f"unsupported PLY format line: {line!r}")
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError(f"bad element line: {line!r}")
            try:
                count = int(tokens[2])
            except ValueError as exc:
                raise ParseError(f"bad element count: {line!r}") from exc
            elements.append((tokens[1], count, []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError("property before any element")
            if tokens[1] == "list":
                raise ParseError("list properties are not supported")
            if len(tokens) != 3 or tokens[1] not in _PLY_TYPES:
                raise ParseError(f"bad property line: {line!r}")
            elements[-1][2].append((tokens[2], _PLY_TYPES[tokens[1]]))
        elif tokens[0] == "end_header":
            break
        else:
            raise ParseError(f"unrecognized header line: {line!r}")
    if fmt is None:
        raise ParseError("PLY header has no format line")

    vertex = next((e for e in elements if e[0] == "vertex"), None)
    if vertex is None:
        raise ParseError("PLY has no vertex element")
    _, count, props = vertex
    names = [p[0] for p in props]
    for field in ("x", "y", "z"):
        if field not in names:
            raise MissingProperty(f"vertex element lacks {field!r}")
    for field in ("red", "green", "blue"):
        if field not in names:
            raise MissingProperty(f"vertex element lacks {field!r}")

    if elements[0][0] != "vertex":
        raise ParseError("vertex must be the first element")

    if fmt == "binary_little_endian":
        dtype = np.dtype([(n, "<" + c) for n, c in props])
        need = dtype.itemsize * count
        if len(payload) < need:
            raise ParseError(f"truncated payload: need {need} bytes, have {len(payload)}")
        table = np.frombuffer(payload[:need], dtype=dtype)
    else:
        text = payload.decode("ascii", errors="replace").split()
        need = len(props) * count
        if len(text) < need:
            raise ParseError(f"truncated ASCII payload: need {need} values, have {len(text)}")
        table = np.zeros(count, dtype=np.dtype([(n, c) for n, c in props]))
        try:
            grid = np.array(text[:need], dtype=np.float64).reshape(count, len(props))
        except ValueError as exc:
            raise ParseError("non-numeric token in ASCII payload") from exc
        for j, (name, _) in enumerate(props):
            table[name] = grid[:, j]

    positions = np.stack([table["x"], table["y"], table["z"]], axis=1).astype(np.float32)
    colors = np.stack([table["red"], table["green"], table["blue"]], axis=1).astype(np.uint8)
    return ColorPointCloud(positions, colors)


def save_ply(cloud: ColorPointCloud, path, binary: bool = True) -> None:
    """Write PLY 1.0 with float x,y,z and uchar red,green,blue."""
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt} 1.0\n"
        f"element vertex {len(cloud)}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        "end_header\n"
    )
    path = Path(path)
    if binary:
        table = np.zeros(len(cloud), dtype=np.dtype(
            [("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
             ("red", "u1"), ("green", "u1"), ("blue", "u1")]))
        for j, name in enumerate(("x", "y", "z")):
            table[name] = cloud.positions[:, j]
        for j, name in enumerate(("red", "green", "blue")):
            table[name] = cloud.colors[:, j]
        path.write_bytes(header.encode("ascii") + table.tobytes())
    else:
        rows = [
            f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g} {c[0]} {c[1]} {c[2]}"
            for p, c in zip(cloud.positions, cloud.colors)
        ]
        path.write_text(header + "\n".join(rows) + ("\n" if rows else ""))
