"""Binary format carriers: PLY object clouds, PFM depth maps, .flo flow fields.

All three formats are little-endian single-precision on disk; parsers and
writers round-trip bit-exactly on the supported subset.  PFM rows are
stored bottom-to-top per the format convention; arrays in memory are
always top-to-bottom.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    FormatError,
    InvalidGeometryError,
    SchemaError,
    UnsupportedFormatError,
)

FLO_MAGIC = 202021.25

# Flow values at or above this magnitude mark "unknown flow" (the common
# Middlebury sentinel convention); samplers treat them as invalid.
FLOW_INVALID_THRESHOLD = 1e8


@dataclass
class ObjectCloud:
    """An object's 3D point set in its local frame, with optional colors.

    Attributes:
        points: (N, 3) float64, object-local meters.
        colors: optional (N, 3) uint8 RGB, one row per point.
    """

    points: np.ndarray
    colors: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if self.points.shape[0] == 0:
            raise InvalidGeometryError("object cloud must contain at least one point")
        if not np.all(np.isfinite(self.points)):
            raise InvalidGeometryError("object cloud contains non-finite points")
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if self.colors.shape[0] != self.points.shape[0]:
                raise InvalidGeometryError("colors and points lengths differ")

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


# ---------------------------------------------------------------------------
# PLY
# ---------------------------------------------------------------------------

_PLY_SCALAR_SIZES = {
    "char": 1, "int8": 1, "uchar": 1, "uint8": 1,
    "short": 2, "int16": 2, "ushort": 2, "uint16": 2,
    "int": 4, "int32": 4, "uint": 4, "uint32": 4,
    "float": 4, "float32": 4, "double": 8, "float64": 8,
}

_PLY_NP_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def parse_ply(data: bytes) -> ObjectCloud:
    """Parse an ASCII or binary-little-endian PLY vertex cloud.

    Requires float x/y/z vertex properties; picks up uchar red/green/blue
    when present.  Extra scalar vertex properties are skipped.  Elements
    after the vertex element are ignored.

    Raises:
        FormatError: not a PLY file or truncated data.
        UnsupportedFormatError: big-endian PLY, or list properties inside
            the vertex element of a binary file.
        SchemaError: x/y/z properties missing.
    """
    try:
        header_end = data.index(b"end_header")
    except ValueError:
        raise FormatError("PLY header terminator not found") from None
    header_end = data.index(b"\n", header_end) + 1
    header_lines = data[:header_end].decode("ascii", errors="replace").splitlines()
    if not header_lines or header_lines[0].strip() != "ply":
        raise FormatError("missing 'ply' magic line")

    fmt = None
    elements: list[tuple[str, int, list[tuple[str, str]]]] = []
    for line in header_lines[1:]:
        parts = line.strip().split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise FormatError("property before any element")
            if parts[1] == "list":
                elements[-1][2].append(("list", parts[-1]))
            else:
                elements[-1][2].append((parts[1], parts[2]))

    if fmt is None:
        raise FormatError("PLY format line missing")
    if fmt == "binary_big_endian":
        raise UnsupportedFormatError("big-endian PLY is not supported")
    if fmt not in ("ascii", "binary_little_endian"):
        raise UnsupportedFormatError(f"unknown PLY format {fmt!r}")
    if not elements or elements[0][0] != "vertex":
        raise SchemaError("PLY must declare a vertex element first")

    _, count, props = elements[0]
    names = [name for _, name in props]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise SchemaError(f"PLY vertex element lacks property {axis!r}")
    has_rgb = all(c in names for c in ("red", "green", "blue"))

    body = data[header_end:]
    if fmt == "ascii":
        rows = body.decode("ascii").split("\n")
        values = []
        taken = 0
        for row in rows:
            if taken == count:
                break
            row = row.strip()
            if not row:
                continue
            fields = row.split()
            if len(fields) < len(props):
                raise FormatError("short PLY ASCII vertex row")
            values.append(fields)
            taken += 1
        if taken != count:
            raise FormatError(f"expected {count} vertices, found {taken}")
        cols = {name: idx for idx, (_, name) in enumerate(props)}
        points = np.array(
            [[float(v[cols["x"]]), float(v[cols["y"]]), float(v[cols["z"]])] for v in values]
        )
        colors = None
        if has_rgb:
            colors = np.array(
                [
                    [int(v[cols["red"]]), int(v[cols["green"]]), int(v[cols["blue"]])]
                    for v in values
                ],
                dtype=np.uint8,
            )
        return ObjectCloud(points, colors)

    # binary little endian: build a structured dtype over the vertex element
    fields = []
    for i, (typ, name) in enumerate(props):
        if typ == "list":
            raise UnsupportedFormatError("list property inside binary vertex element")
        if typ not in _PLY_NP_TYPES:
            raise FormatError(f"unknown PLY property type {typ!r}")
        fields.append((f"f{i}__{name}", "<" + _PLY_NP_TYPES[typ]))
    dtype = np.dtype(fields)
    need = dtype.itemsize * count
    if len(body) < need:
        raise FormatError("binary PLY vertex data truncated")
    rec = np.frombuffer(body[:need], dtype=dtype)
    by_name = {name: f"f{i}__{name}" for i, (_, name) in enumerate(props)}
    points = np.column_stack(
        [rec[by_name["x"]], rec[by_name["y"]], rec[by_name["z"]]]
    ).astype(np.float64)
    colors = None
    if has_rgb:
        colors = np.column_stack(
            [rec[by_name["red"]], rec[by_name["green"]], rec[by_name["blue"]]]
        ).astype(np.uint8)
    return ObjectCloud(points, colors)


def write_ply(cloud: ObjectCloud, binary: bool = True) -> bytes:
    """Serialize an object cloud to PLY (binary little-endian by default).

    Coordinates are written single precision, matching the other carriers.
    """
    n = cloud.points.shape[0]
    has_rgb = cloud.colors is not None
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {n}")
    header += ["property float x", "property float y", "property float z"]
    if has_rgb:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")

    pts32 = cloud.points.astype(np.float32)
    if binary:
        if has_rgb:
            dtype = np.dtype(
                [("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                 ("red", "u1"), ("green", "u1"), ("blue", "u1")]
            )
            rec = np.empty(n, dtype=dtype)
            rec["x"], rec["y"], rec["z"] = pts32[:, 0], pts32[:, 1], pts32[:, 2]
            rec["red"], rec["green"], rec["blue"] = (
                cloud.colors[:, 0], cloud.colors[:, 1], cloud.colors[:, 2]
            )
        else:
            dtype = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4")])
            rec = np.empty(n, dtype=dtype)
            rec["x"], rec["y"], rec["z"] = pts32[:, 0], pts32[:, 1], pts32[:, 2]
        return head + rec.tobytes()

    out = io.StringIO()
    for i in range(n):
        coords = " ".join(repr(float(c)) for c in pts32[i])
        if has_rgb:
            r, g, b = (int(c) for c in cloud.colors[i])
            out.write(f"{coords} {r} {g} {b}\n")
        else:
            out.write(coords + "\n")
    return head + out.getvalue().encode("ascii")


# ---------------------------------------------------------------------------
# PFM (grayscale "Pf")
# ---------------------------------------------------------------------------


def parse_pfm(data: bytes) -> np.ndarray:
    """Parse a grayscale little-endian PFM into an (H, W) float32 array.

    PFM stores rows bottom-to-top; the returned array is top-to-bottom.

    Raises:
        FormatError: wrong magic or truncated data.
        UnsupportedFormatError: color "PF" files or big-endian scale.
    """
    stream = io.BytesIO(data)

    def next_token() -> bytes:
        tok = b""
        while True:
            ch = stream.read(1)
            if ch == b"":
                raise FormatError("truncated PFM header")
            if ch.isspace():
                if tok:
                    return tok
                continue
            tok += ch

    magic = next_token()
    if magic == b"PF":
        raise UnsupportedFormatError("color PFM not supported, expected grayscale 'Pf'")
    if magic != b"Pf":
        raise FormatError(f"bad PFM magic {magic!r}")
    try:
        width = int(next_token())
        height = int(next_token())
        scale = float(next_token())
    except ValueError as exc:
        raise FormatError("malformed PFM header") from exc
    if scale > 0:
        raise UnsupportedFormatError("big-endian PFM (positive scale) not supported")
    payload = stream.read(4 * width * height)
    if len(payload) != 4 * width * height:
        raise FormatError("PFM pixel data truncated")
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    return values[::-1].copy()  # bottom-to-top on disk


def write_pfm(values: np.ndarray) -> bytes:
    """Serialize an (H, W) float32 array as grayscale little-endian PFM."""
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise FormatError(f"PFM payload must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    return header + arr[::-1].astype("<f4").tobytes()


# ---------------------------------------------------------------------------
# Middlebury .flo
# ---------------------------------------------------------------------------


def parse_flo(data: bytes) -> np.ndarray:
    """Parse a Middlebury .flo file into an (H, W, 2) float32 (du, dv) field.

    Raises:
        FormatError: wrong magic number or truncated data.
    """
    if len(data) < 12:
        raise FormatError(".flo file too short for its header")
    (magic,) = struct.unpack("<f", data[:4])
    if magic != np.float32(FLO_MAGIC):
        raise FormatError(f"bad .flo magic {magic!r}, expected {FLO_MAGIC}")
    width, height = struct.unpack("<ii", data[4:12])
    if width <= 0 or height <= 0:
        raise FormatError(f"bad .flo dimensions {width}x{height}")
    need = 8 * width * height
    if len(data) - 12 < need:
        raise FormatError(".flo pixel data truncated")
    values = np.frombuffer(data[12 : 12 + need], dtype="<f4")
    return values.reshape(height, width, 2).copy()


def write_flo(flow: np.ndarray) -> bytes:
    """Serialize an (H, W, 2) float32 flow field as Middlebury .flo."""
    arr = np.asarray(flow, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise FormatError(f".flo payload must be (H, W, 2), got shape {arr.shape}")
    h, w = arr.shape[:2]
    header = struct.pack("<fii", FLO_MAGIC, w, h)
    return header + arr.astype("<f4").tobytes()
