# mesh_io.py - readers and writers for the inspection-cell inputs
"""
STL (ASCII and binary), OBJ, feature-point CSV and scanner JSON.

Mesh files are parsed by trimesh; the loaders then merge duplicate vertices
and drop zero-area triangles with a warning. Anything unreadable becomes
MeshFormatError.
"""
import io
import json
import logging
import struct
from pathlib import Path
from typing import List, Union

import numpy as np
import pandas as pd
import trimesh
from pydantic import ValidationError

from errors import InputError, MeshFormatError
from inspect_geom import FeaturePoint, InspectionCylinder, ScannerConfig, SensorCone, TriangleMesh

logger = logging.getLogger("pmi-dt.mesh-io")

PathLike = Union[str, Path]

_STL_RECORD = np.dtype([("normal", "<f4", (3,)), ("corners", "<f4", (3, 3)), ("attr", "<u2")])


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise MeshFormatError(f"Cannot read {path}: {e}")


def _from_corners(corners: np.ndarray) -> TriangleMesh:
    """Turn an (m, 3, 3) soup into an indexed mesh with shared vertices."""
    flat = corners.reshape(-1, 3).astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise MeshFormatError("Mesh has non-finite coordinates")
    vertices, inverse = np.unique(flat, axis=0, return_inverse=True)
    triangles = np.asarray(inverse).reshape(-1, 3)
    return TriangleMesh.from_raw(vertices, triangles)


def _load_trimesh(path: PathLike, file_type: str) -> np.ndarray:
    """Parse with trimesh and return the (m, 3, 3) triangle soup."""
    data = _read_bytes(path)
    try:
        loaded = trimesh.load(io.BytesIO(data), file_type=file_type, force="mesh", process=False)
        if isinstance(loaded, trimesh.Scene):
            geometry = [g for g in loaded.geometry.values() if isinstance(g, trimesh.Trimesh)]
            loaded = trimesh.util.concatenate(geometry) if geometry else None
    except Exception as e:
        raise MeshFormatError(f"{path} is not a readable {file_type.upper()} mesh: {e}")
    if not isinstance(loaded, trimesh.Trimesh) or len(loaded.faces) == 0:
        raise MeshFormatError(f"{path} contains no triangles")
    vertices = np.asarray(loaded.vertices, dtype=np.float64)
    faces = np.asarray(loaded.faces, dtype=np.int64)
    if faces.min() < 0 or faces.max() >= len(vertices):
        raise MeshFormatError(f"{path}: face references a vertex index out of range")
    return vertices[faces]


# ── STL ─────────────────────────────────────────────────────────────────
def read_stl(path: PathLike) -> TriangleMesh:
    corners = _load_trimesh(path, "stl")
    logger.info(f"✅ Read STL {path}: {len(corners)} facets")
    return _from_corners(corners)


def write_stl(mesh: TriangleMesh, path: PathLike, binary: bool = False, name: str = "part"):
    normals = mesh.face_normals
    corners = mesh.corners
    path = Path(path)
    if binary:
        records = np.zeros(mesh.n_triangles, dtype=_STL_RECORD)
        records["normal"] = normals
        records["corners"] = corners
        header = name.encode("ascii")[:80].ljust(80, b" ")
        path.write_bytes(header + struct.pack("<I", mesh.n_triangles) + records.tobytes())
        return
    lines = [f"solid {name}"]
    for n, tri in zip(normals, corners):
        lines.append(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
        lines.append("    outer loop")
        for v in tri:
            lines.append(f"      vertex {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


# ── OBJ ─────────────────────────────────────────────────────────────────
def read_obj(path: PathLike) -> TriangleMesh:
    corners = _load_trimesh(path, "obj")
    logger.info(f"✅ Read OBJ {path}: {len(corners)} triangles")
    return _from_corners(corners)


def write_obj(mesh: TriangleMesh, path: PathLike):
    lines = [f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}" for v in mesh.vertices]
    lines += [f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}" for t in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_mesh(path: PathLike) -> TriangleMesh:
    suffix = Path(path).suffix.lower()
    if suffix == ".stl":
        return read_stl(path)
    if suffix == ".obj":
        return read_obj(path)
    raise MeshFormatError(f"Unsupported mesh format {suffix or '(none)'}; use .stl or .obj")


# ── features and scanner ────────────────────────────────────────────────
def load_features(path: PathLike) -> List[FeaturePoint]:
    """CSV with columns label,x,y,z and optional nx,ny,nz."""
    try:
        df = pd.read_csv(path, dtype={"label": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"Cannot read feature file {path}: {e}")
    missing = [c for c in ("label", "x", "y", "z") if c not in df.columns]
    if missing:
        raise InputError(f"Feature file {path} lacks columns: {', '.join(missing)}")
    has_normal = all(c in df.columns for c in ("nx", "ny", "nz"))
    features = []
    try:
        for row in df.itertuples(index=False):
            normal = (float(row.nx), float(row.ny), float(row.nz)) if has_normal else None
            position = (float(row.x), float(row.y), float(row.z))
            features.append(FeaturePoint(label=str(row.label), position=position, normal=normal))
    except (TypeError, ValueError) as e:
        raise InputError(f"Feature file {path} is invalid: {e}")
    labels = [f.label for f in features]
    if len(set(labels)) != len(labels):
        raise InputError(f"Feature file {path} repeats a label")
    return features


def load_scanner_config(path: PathLike) -> ScannerConfig:
    """
    Scanner JSON::

        {"cylinder": {"radius_mm": 100, "height_mm": 100},
         "rotation_steps": 8,
         "sensors": [{"apex": [..], "axis": [..], "half_angle_deg": 20, "group": "A"}]}
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise InputError(f"Cannot read scanner config {path}: {e}")
    except json.JSONDecodeError as e:
        raise InputError(f"Scanner config {path} is not valid JSON: {e}")
    try:
        cyl = data.get("cylinder", {})
        cylinder = InspectionCylinder(
            radius=cyl.get("radius_mm", 100.0),
            height=cyl.get("height_mm", 100.0),
            origin=tuple(cyl.get("origin", (0.0, 0.0, 0.0))),
        )
        sensors = [
            SensorCone.from_degrees(
                apex=tuple(s["apex"]), axis=tuple(s["axis"]), half_angle_deg=s["half_angle_deg"],
                group=s.get("group"), label=s.get("label"),
            )
            for s in data.get("sensors", [])
        ]
        return ScannerConfig(cylinder=cylinder, sensors=sensors, rotation_steps=data.get("rotation_steps", 8))
    except (KeyError, TypeError, AttributeError, ValidationError) as e:
        raise InputError(f"Scanner config {path} is invalid: {e}")
