"""Point cloud and table I/O: PLY files, MOS CSV tables, error heatmaps.

PLY support is deliberately narrow: a single ``vertex`` element with scalar
float/double/uchar properties, ascii or binary_little_endian. Everything
else (faces, list properties, big-endian) is rejected rather than skipped.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

# Unit-norm tolerance for normals, both on load and on cloud validation.
NORMAL_TOL = 1e-6

_PLY_DTYPES = {
    "float": "<f4",
    "float32": "<f4",
    "double": "<f8",
    "float64": "<f8",
    "uchar": "<u1",
    "uint8": "<u1",
}


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of 3D points with optional unit normals.

    Coordinates are stored as float64 regardless of the file precision;
    squared distances on voxel grids stay exact that way. Point order is
    preserved from the source and is the tie-breaking identity used by the
    nearest-neighbor index. Instances are treated as immutable.
    """

    name: str
    points: np.ndarray
    normals: np.ndarray | None = None
    precision_bits: int | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DataError(f"points must have shape (N, 3); got {pts.shape}")
        if pts.shape[0] < 1:
            raise DataError("a point cloud needs at least one point")
        if not np.isfinite(pts).all():
            raise DataError("point coordinates must all be finite")
        object.__setattr__(self, "points", pts)

        if self.normals is not None:
            nrm = np.ascontiguousarray(np.asarray(self.normals, dtype=np.float64))
            if nrm.shape != pts.shape:
                raise DataError(
                    f"normals shape {nrm.shape} does not match points {pts.shape}"
                )
            norms = np.linalg.norm(nrm, axis=1)
            if not np.isfinite(norms).all() or np.abs(norms - 1.0).max() > NORMAL_TOL:
                raise DataError(f"normals must be unit length within {NORMAL_TOL}")
            object.__setattr__(self, "normals", nrm)

        if self.precision_bits is not None and self.precision_bits <= 0:
            raise DataError("precision_bits must be a positive integer")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def signal_peak(self) -> float | None:
        """Peak value implied by the declared bit depth (2^bits - 1)."""
        if self.precision_bits is None:
            return None
        return float(2 ** self.precision_bits - 1)


@dataclass(frozen=True)
class MosRecord:
    """One subjective-test stimulus: its MOS plus any objective scores."""

    stimulus_id: str
    mos: float
    objective_scores: dict[str, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# PLY parsing
# ---------------------------------------------------------------------------


def _parse_ply_header(fh) -> tuple[str, int, list[tuple[str, str]], int]:
    """Read the header; return (fmt, vertex_count, [(name, dtype)], data_offset)."""
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise DataError("not a PLY file (missing 'ply' magic line)")
    fmt = None
    vertex_count = None
    props: list[tuple[str, str]] = []
    in_vertex = False
    while True:
        raw = fh.readline()
        if not raw:
            raise DataError("unexpected end of file inside PLY header")
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line.startswith(("comment", "obj_info")):
            continue
        tokens = line.split()
        keyword = tokens[0]
        if keyword == "format":
            if len(tokens) < 2 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise DataError(f"unsupported PLY format: {line!r}")
            fmt = tokens[1]
        elif keyword == "element":
            if len(tokens) != 3:
                raise DataError(f"malformed element line: {line!r}")
            if tokens[1] != "vertex":
                raise DataError(f"unsupported PLY element '{tokens[1]}'")
            if vertex_count is not None:
                raise DataError("duplicate vertex element")
            try:
                vertex_count = int(tokens[2])
            except ValueError:
                raise DataError(f"malformed vertex count: {line!r}") from None
            in_vertex = True
        elif keyword == "property":
            if not in_vertex:
                raise DataError("property declared outside the vertex element")
            if tokens[1] == "list":
                raise DataError("list properties are not supported")
            if len(tokens) != 3:
                raise DataError(f"malformed property line: {line!r}")
            ptype, pname = tokens[1], tokens[2]
            if ptype not in _PLY_DTYPES:
                raise DataError(f"unsupported property type '{ptype}'")
            if pname in (n for n, _ in props):
                raise DataError(f"duplicate property '{pname}'")
            props.append((pname, _PLY_DTYPES[ptype]))
        elif keyword == "end_header":
            break
        else:
            raise DataError(f"unrecognized header line: {line!r}")
    if fmt is None:
        raise DataError("PLY header missing format line")
    if vertex_count is None:
        raise DataError("PLY header declares no vertex element")
    if vertex_count == 0:
        raise DataError("PLY declares zero vertices")
    if not props:
        raise DataError("vertex element declares no properties")
    return fmt, vertex_count, props, fh.tell()


def read_ply_fields(path) -> dict[str, np.ndarray]:
    """Read every scalar vertex property of a PLY file.

    Returns a dict mapping property name to a 1D array (float64 for float
    and double properties, uint8 for uchar). This is the low-level reader
    behind :func:`load_ply`; it is also handy for pulling extra scalar
    channels (e.g. the ``error`` column of a heatmap file) back out.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        fmt, count, props, offset = _parse_ply_header(fh)
        payload = fh.read()

    names = [n for n, _ in props]
    if fmt == "binary_little_endian":
        rec = np.dtype([(n, d) for n, d in props])
        expected = rec.itemsize * count
        if len(payload) != expected:
            raise DataError(
                f"binary payload is {len(payload)} bytes; expected {expected}"
            )
        table = np.frombuffer(payload, dtype=rec)
        out = {n: np.asarray(table[n]) for n in names}
    else:
        text = payload.decode("ascii", errors="replace")
        try:
            data = np.loadtxt(io.StringIO(text), dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise DataError(f"malformed ascii vertex data: {exc}") from exc
        if data.shape[0] != count or data.shape[1] != len(props):
            raise DataError(
                f"ascii data shape {data.shape} does not match header "
                f"({count} vertices x {len(props)} properties)"
            )
        out = {}
        for j, (n, d) in enumerate(props):
            col = data[:, j]
            out[n] = col.astype(np.uint8) if d == "<u1" else col

    for n, d in props:
        if d != "<u1":
            out[n] = out[n].astype(np.float64)
    return out


def load_ply(path) -> PointCloud:
    """Load a PLY point cloud.

    The vertex element must carry x, y, z; nx, ny, nz are picked up when all
    three are present. Normals are renormalized to unit length unless they
    already are within ``NORMAL_TOL`` (so a save/load round trip preserves
    bits); zero-length normals are rejected. Other scalar properties of
    supported types are tolerated and ignored.
    """
    path = Path(path)
    fields = read_ply_fields(path)
    for axis in ("x", "y", "z"):
        if axis not in fields:
            raise DataError(f"vertex element lacks coordinate property '{axis}'")
    points = np.column_stack([fields["x"], fields["y"], fields["z"]])
    if not np.isfinite(points).all():
        raise DataError(f"{path.name}: non-finite coordinate in vertex data")

    normal_keys = [k for k in ("nx", "ny", "nz") if k in fields]
    normals = None
    if normal_keys:
        if len(normal_keys) != 3:
            raise DataError("normals require all of nx, ny, nz")
        normals = np.column_stack([fields["nx"], fields["ny"], fields["nz"]])
        norms = np.linalg.norm(normals, axis=1)
        if (norms < 1e-12).any():
            bad = int(np.argmax(norms < 1e-12))
            raise DataError(f"zero-length normal at vertex {bad}")
        fix = np.abs(norms - 1.0) > NORMAL_TOL
        if fix.any():
            normals = normals.copy()
            normals[fix] /= norms[fix, None]

    return PointCloud(name=path.stem, points=points, normals=normals)


def save_ply(cloud: PointCloud, path, encoding: str = "binary_little_endian") -> None:
    """Write a cloud as PLY with double-precision coordinates.

    Both encodings round-trip float64 payloads bit-exactly (ascii uses
    %.17g, which is enough digits to reproduce any double).
    """
    if encoding not in ("ascii", "binary_little_endian"):
        raise DataError(f"unsupported encoding {encoding!r}")
    path = Path(path)
    names = ["x", "y", "z"]
    columns = [cloud.points[:, 0], cloud.points[:, 1], cloud.points[:, 2]]
    if cloud.normals is not None:
        names += ["nx", "ny", "nz"]
        columns += [cloud.normals[:, 0], cloud.normals[:, 1], cloud.normals[:, 2]]

    header = ["ply", f"format {encoding} 1.0", f"element vertex {cloud.n_points}"]
    header += [f"property double {n}" for n in names]
    header.append("end_header")

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if encoding == "ascii":
            data = np.column_stack(columns)
            np.savetxt(fh, data, fmt="%.17g")
        else:
            rec = np.empty(cloud.n_points, dtype=np.dtype([(n, "<f8") for n in names]))
            for n, col in zip(names, columns):
                rec[n] = col
            fh.write(rec.tobytes())


# ---------------------------------------------------------------------------
# Error heatmaps
# ---------------------------------------------------------------------------


def error_colors(errors: np.ndarray) -> np.ndarray:
    """Map error magnitudes to uint8 RGB on a blue->green->red ramp.

    The ramp is linear in t = error / max(error): t=0 is (0,0,255), t=0.5 is
    (0,255,0) and t=1 is (255,0,0); the map position is monotone in the
    error. An all-zero field maps every point to the minimum color.
    """
    errors = np.asarray(errors, dtype=np.float64)
    top = errors.max()
    t = errors / top if top > 0 else np.zeros_like(errors)
    rgb = np.zeros((errors.shape[0], 3), dtype=np.float64)
    lo = t <= 0.5
    rgb[lo, 1] = 510.0 * t[lo]
    rgb[lo, 2] = 255.0 - 510.0 * t[lo]
    hi = ~lo
    rgb[hi, 0] = 510.0 * (t[hi] - 0.5)
    rgb[hi, 1] = 255.0 - 510.0 * (t[hi] - 0.5)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def export_error_heatmap(
    cloud: PointCloud, errors, path, encoding: str = "binary_little_endian"
) -> None:
    """Write a PLY whose vertices are colored by per-point error.

    Each vertex carries uchar red/green/blue from :func:`error_colors` plus
    the raw error as a double property named ``error``, in cloud order.
    """
    errors = np.asarray(errors, dtype=np.float64)
    if errors.shape != (cloud.n_points,):
        raise DataError(
            f"errors length {errors.shape} does not match point count {cloud.n_points}"
        )
    if not np.isfinite(errors).all() or (errors < 0).any():
        raise DataError("errors must be finite and non-negative")
    if encoding not in ("ascii", "binary_little_endian"):
        raise DataError(f"unsupported encoding {encoding!r}")

    rgb = error_colors(errors)
    header = [
        "ply",
        f"format {encoding} 1.0",
        f"element vertex {cloud.n_points}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "property double error",
        "end_header",
    ]
    with open(Path(path), "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if encoding == "ascii":
            for (x, y, z), (r, g, b), e in zip(cloud.points, rgb, errors):
                fh.write(
                    f"{x:.17g} {y:.17g} {z:.17g} {int(r)} {int(g)} {int(b)} {e:.17g}\n".encode()
                )
        else:
            rec = np.empty(
                cloud.n_points,
                dtype=np.dtype(
                    [
                        ("x", "<f8"),
                        ("y", "<f8"),
                        ("z", "<f8"),
                        ("red", "<u1"),
                        ("green", "<u1"),
                        ("blue", "<u1"),
                        ("error", "<f8"),
                    ]
                ),
            )
            rec["x"], rec["y"], rec["z"] = cloud.points.T
            rec["red"], rec["green"], rec["blue"] = rgb.T
            rec["error"] = errors
            fh.write(rec.tobytes())


# ---------------------------------------------------------------------------
# MOS tables
# ---------------------------------------------------------------------------


def load_mos_table(path) -> list[MosRecord]:
    """Load a MOS CSV: required columns stimulus_id and mos, header row first.

    Any additional column whose values all parse as floats becomes an
    objective score keyed by its header name; non-numeric columns are
    ignored. Row order is preserved. Duplicate stimulus ids, a non-numeric
    mos, ragged rows or an empty data section are hard errors.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path.name}: empty CSV") from None
        header = [h.strip() for h in header]
        rows = [row for row in reader if row]

    for required in ("stimulus_id", "mos"):
        if required not in header:
            raise DataError(f"{path.name}: missing required column '{required}'")
    if not rows:
        raise DataError(f"{path.name}: no data rows")

    id_col = header.index("stimulus_id")
    mos_col = header.index("mos")
    extra_cols = [
        (j, name)
        for j, name in enumerate(header)
        if j not in (id_col, mos_col) and name
    ]

    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"{path.name}: line {i} has {len(row)} fields, expected {len(header)}")

    ids = [row[id_col].strip() for row in rows]
    seen = set()
    for i, sid in enumerate(ids, start=2):
        if not sid:
            raise DataError(f"{path.name}: line {i} has an empty stimulus_id")
        if sid in seen:
            raise DataError(f"{path.name}: duplicate stimulus_id '{sid}'")
        seen.add(sid)

    mos_values = []
    for i, row in enumerate(rows, start=2):
        try:
            v = float(row[mos_col])
        except ValueError:
            raise DataError(
                f"{path.name}: non-numeric mos {row[mos_col]!r} on line {i}"
            ) from None
        if not np.isfinite(v):
            raise DataError(f"{path.name}: mos must be finite (line {i})")
        mos_values.append(v)

    numeric: dict[str, list[float]] = {}
    for j, name in extra_cols:
        try:
            numeric[name] = [float(row[j]) for row in rows]
        except ValueError:
            continue  # not a numeric column

    return [
        MosRecord(
            stimulus_id=sid,
            mos=mos,
            objective_scores={name: numeric[name][i] for name in numeric},
        )
        for i, (sid, mos) in enumerate(zip(ids, mos_values))
    ]
