# inspect_geom.py - geometric validation of the optical inspection cell
"""
Containment of a part in the scanner's cylindrical inspection volume,
light-cone visibility of critical features (with occlusion by the part
itself), and scan-vs-CAD deviation.

Units are millimetres throughout. Meshes are plain numpy arrays wrapped in
TriangleMesh; the scanner description is pydantic (it comes from JSON).
"""
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from errors import (
    DegenerateTriangle,
    EmptyMesh,
    EmptyScan,
    FeatureOutsideMesh,
    MeshFormatError,
    NoSensors,
)

logger = logging.getLogger("pmi-dt.inspect-geom")

Vec3 = Tuple[float, float, float]

SELF_HIT_OFFSET_MM = 1e-4
FEATURE_BOX_MARGIN_MM = 1.0
BVH_THRESHOLD = 10_000
DEGENERATE_AREA = 1e-12


# ── mesh ────────────────────────────────────────────────────────────────
class TriangleMesh:
    """Indexed triangle mesh. Vertices are (n, 3) float64, triangles (m, 3) int64."""

    def __init__(self, vertices, triangles):
        v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise MeshFormatError("Mesh has non-finite vertex coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshFormatError("Triangle references a vertex index out of range")
        self.vertices = v
        self.triangles = t
        if t.size:
            bad = np.flatnonzero(self.areas <= DEGENERATE_AREA)
            if bad.size:
                raise DegenerateTriangle(f"{bad.size} zero-area triangles, first is #{int(bad[0])}")

    @classmethod
    def from_raw(cls, vertices, triangles) -> "TriangleMesh":
        """Build a mesh from loader output, dropping zero-area triangles."""
        v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshFormatError("Triangle references a vertex index out of range")
        if t.size:
            corners = v[t]
            areas = 0.5 * np.linalg.norm(np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1)
            keep = areas > DEGENERATE_AREA
            if not np.all(keep):
                logger.warning(f"⚠️ Dropped {int((~keep).sum())} degenerate triangles")
                t = t[keep]
        return cls(v, t)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0 or len(self.triangles) == 0

    @property
    def corners(self) -> np.ndarray:
        return self.vertices[self.triangles]

    @property
    def areas(self) -> np.ndarray:
        c = self.corners
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    @property
    def face_normals(self) -> np.ndarray:
        c = self.corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return n / np.linalg.norm(n, axis=1)[:, None]

    def vertex_normals(self) -> np.ndarray:
        """Unit sum of the unit normals of the faces around each vertex."""
        acc = np.zeros_like(self.vertices)
        normals = self.face_normals
        for k in range(3):
            np.add.at(acc, self.triangles[:, k], normals)
        norms = np.linalg.norm(acc, axis=1)
        norms[norms == 0] = 1.0
        return acc / norms[:, None]

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def translated(self, offset: Sequence[float]) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(offset, dtype=np.float64), self.triangles.copy())

    def rotated_z(self, angle: float, center: Sequence[float] = (0.0, 0.0, 0.0)) -> "TriangleMesh":
        return TriangleMesh(rotate_z(self.vertices, angle, center), self.triangles.copy())

    def subset(self, keep: np.ndarray) -> "TriangleMesh":
        """Same vertices, only the triangles selected by the boolean mask `keep`."""
        return TriangleMesh(self.vertices.copy(), self.triangles[np.asarray(keep, dtype=bool)])

    @staticmethod
    def merged(meshes: Iterable["TriangleMesh"]) -> "TriangleMesh":
        vertices, triangles, offset = [], [], 0
        for mesh in meshes:
            vertices.append(mesh.vertices)
            triangles.append(mesh.triangles + offset)
            offset += len(mesh.vertices)
        if not vertices:
            return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
        return TriangleMesh(np.vstack(vertices), np.vstack(triangles))


def rotate_z(points: np.ndarray, angle: float, center: Sequence[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    center = np.asarray(center, dtype=np.float64)
    return (np.asarray(points, dtype=np.float64) - center) @ rot.T + center


# ── synthetic shapes ────────────────────────────────────────────────────
def cylinder_mesh(radius: float, length: float, segments: int = 32,
                  base_z: float = 0.0, center: Tuple[float, float] = (0.0, 0.0)) -> TriangleMesh:
    """Closed, outward-oriented cylinder along +Z; a stand-in for the bolt."""
    angles = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.column_stack([center[0] + radius * np.cos(angles), center[1] + radius * np.sin(angles)])
    bottom = np.column_stack([ring, np.full(segments, base_z)])
    top = np.column_stack([ring, np.full(segments, base_z + length)])
    vertices = np.vstack([bottom, top, [[center[0], center[1], base_z]], [[center[0], center[1], base_z + length]]])
    bc, tc = 2 * segments, 2 * segments + 1
    triangles = []
    for i in range(segments):
        j = (i + 1) % segments
        triangles.append((i, j, segments + j))
        triangles.append((i, segments + j, segments + i))
        triangles.append((bc, j, i))
        triangles.append((tc, segments + i, segments + j))
    return TriangleMesh(vertices, triangles)


def box_mesh(lo: Sequence[float], hi: Sequence[float]) -> TriangleMesh:
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    vertices = [
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
    ]
    triangles = [
        (0, 2, 1), (0, 3, 2),  # bottom (-z)
        (4, 5, 6), (4, 6, 7),  # top (+z)
        (0, 1, 5), (0, 5, 4),  # -y
        (2, 3, 7), (2, 7, 6),  # +y
        (1, 2, 6), (1, 6, 5),  # +x
        (3, 0, 4), (3, 4, 7),  # -x
    ]
    return TriangleMesh(vertices, triangles)


def plate_mesh(center: Sequence[float], size: float) -> TriangleMesh:
    """Horizontal square of side `size` centred on `center`, normal +Z."""
    cx, cy, cz = center
    h = size / 2.0
    vertices = [(cx - h, cy - h, cz), (cx + h, cy - h, cz), (cx + h, cy + h, cz), (cx - h, cy + h, cz)]
    return TriangleMesh(vertices, [(0, 1, 2), (0, 2, 3)])


# ── scanner description ─────────────────────────────────────────────────
class InspectionCylinder(BaseModel):
    model_config = ConfigDict(frozen=True)

    radius: float = 100.0
    height: float = 100.0
    origin: Vec3 = (0.0, 0.0, 0.0)

    @field_validator("radius", "height")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not (v > 0 and math.isfinite(v)):
            raise ValueError("cylinder radius and height must be positive")
        return v


class SensorCone(BaseModel):
    model_config = ConfigDict(frozen=True)

    apex: Vec3
    axis: Vec3
    half_angle: float
    group: Optional[str] = None
    label: Optional[str] = None

    @field_validator("axis")
    @classmethod
    def _normalize_axis(cls, v: Vec3) -> Vec3:
        norm = math.sqrt(sum(c * c for c in v))
        if norm == 0 or not math.isfinite(norm):
            raise ValueError("sensor axis must be a non-zero finite vector")
        return (v[0] / norm, v[1] / norm, v[2] / norm)

    @field_validator("half_angle")
    @classmethod
    def _half_angle_range(cls, v: float) -> float:
        if not (0.0 < v < math.pi / 2):
            raise ValueError("half_angle must lie in (0, pi/2) radians")
        return v

    @classmethod
    def from_degrees(cls, apex: Vec3, axis: Vec3, half_angle_deg: float, **kw) -> "SensorCone":
        return cls(apex=apex, axis=axis, half_angle=math.radians(half_angle_deg), **kw)

    def contains(self, point: np.ndarray) -> bool:
        d = np.asarray(point, dtype=np.float64) - np.asarray(self.apex)
        dist = float(np.linalg.norm(d))
        if dist == 0.0:
            return False
        return float(np.dot(d, self.axis)) / dist >= math.cos(self.half_angle) - 1e-12


class FeaturePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    position: Vec3
    normal: Optional[Vec3] = None

    @field_validator("label")
    @classmethod
    def _label_not_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("feature label must be non-empty")
        return v

    @field_validator("normal")
    @classmethod
    def _unit_normal(cls, v: Optional[Vec3]) -> Optional[Vec3]:
        if v is None:
            return v
        norm = math.sqrt(sum(c * c for c in v))
        if norm == 0:
            raise ValueError("feature normal must be non-zero")
        return (v[0] / norm, v[1] / norm, v[2] / norm)


class ScannerConfig(BaseModel):
    cylinder: InspectionCylinder = InspectionCylinder()
    sensors: List[SensorCone]
    rotation_steps: int = 8

    @model_validator(mode="after")
    def _steps_positive(self) -> "ScannerConfig":
        if self.rotation_steps < 1:
            raise ValueError("rotation_steps must be at least 1")
        return self


# ── containment ─────────────────────────────────────────────────────────
class VertexViolation(BaseModel):
    index: int
    point: Vec3
    constraints: List[str]


class ContainmentReport(BaseModel):
    fully_inside: bool
    violating_vertices: List[VertexViolation]
    max_radial_mm: float
    min_z_mm: float
    max_z_mm: float


def check_containment(mesh: TriangleMesh, cyl: InspectionCylinder) -> ContainmentReport:
    """Vertex-wise test; for a convex cylinder all vertices inside means the mesh is inside."""
    if mesh.is_empty:
        raise EmptyMesh("Cannot check containment of an empty mesh")
    local = mesh.vertices - np.asarray(cyl.origin)
    r2 = local[:, 0] ** 2 + local[:, 1] ** 2
    radial = r2 > cyl.radius ** 2
    below = local[:, 2] < 0.0
    above = local[:, 2] > cyl.height
    violations = []
    for idx in np.flatnonzero(radial | below | above):
        constraints = []
        if radial[idx]:
            constraints.append("radial")
        if below[idx]:
            constraints.append("below_base")
        if above[idx]:
            constraints.append("above_top")
        p = mesh.vertices[idx]
        violations.append(VertexViolation(index=int(idx), point=(float(p[0]), float(p[1]), float(p[2])),
                                          constraints=constraints))
    report = ContainmentReport(
        fully_inside=not violations,
        violating_vertices=violations,
        max_radial_mm=float(np.sqrt(r2.max())),
        min_z_mm=float(local[:, 2].min()),
        max_z_mm=float(local[:, 2].max()),
    )
    if violations:
        logger.info(f"❌ {len(violations)} vertices outside the inspection volume")
    return report


# ── ray casting ─────────────────────────────────────────────────────────
def segment_hits(origin: np.ndarray, direction: np.ndarray, corners: np.ndarray, t_max: float) -> np.ndarray:
    """
    Watertight ray/triangle test for one ray against many triangles.

    `direction` must be unit length; returns a boolean mask of triangles hit
    at a distance strictly between 0 and `t_max`. Edges shared by two
    triangles are never missed by both.
    """
    if len(corners) == 0:
        return np.zeros(0, dtype=bool)
    kz = int(np.argmax(np.abs(direction)))
    kx, ky = (kz + 1) % 3, (kz + 2) % 3
    if direction[kz] < 0:
        kx, ky = ky, kx
    sx = direction[kx] / direction[kz]
    sy = direction[ky] / direction[kz]
    sz = 1.0 / direction[kz]

    a = corners[:, 0] - origin
    b = corners[:, 1] - origin
    c = corners[:, 2] - origin
    ax, ay = a[:, kx] - sx * a[:, kz], a[:, ky] - sy * a[:, kz]
    bx, by = b[:, kx] - sx * b[:, kz], b[:, ky] - sy * b[:, kz]
    cx, cy = c[:, kx] - sx * c[:, kz], c[:, ky] - sy * c[:, kz]

    u = cx * by - cy * bx
    v = ax * cy - ay * cx
    w = bx * ay - by * ax
    outside = ((u < 0) | (v < 0) | (w < 0)) & ((u > 0) | (v > 0) | (w > 0))
    det = u + v + w
    t_scaled = u * (sz * a[:, kz]) + v * (sz * b[:, kz]) + w * (sz * c[:, kz])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = t_scaled / det
    return ~outside & (det != 0) & (t > 0) & (t < t_max)


class TriangleBVH:
    """Axis-aligned bounding volume hierarchy for any-hit segment queries on big meshes."""

    LEAF_SIZE = 16

    def __init__(self, corners: np.ndarray):
        self.corners = corners
        self.lo: List[np.ndarray] = []
        self.hi: List[np.ndarray] = []
        self.children: List[Tuple[int, int]] = []
        self.items: List[Optional[np.ndarray]] = []
        tri_lo = corners.min(axis=1)
        tri_hi = corners.max(axis=1)
        centroids = corners.mean(axis=1)
        self._build(np.arange(len(corners)), tri_lo, tri_hi, centroids)

    def _build(self, idx: np.ndarray, tri_lo, tri_hi, centroids) -> int:
        node = len(self.lo)
        self.lo.append(tri_lo[idx].min(axis=0) - 1e-9)
        self.hi.append(tri_hi[idx].max(axis=0) + 1e-9)
        self.children.append((-1, -1))
        self.items.append(None)
        if len(idx) <= self.LEAF_SIZE:
            self.items[node] = idx
            return node
        spread = centroids[idx].max(axis=0) - centroids[idx].min(axis=0)
        axis = int(np.argmax(spread))
        order = idx[np.argsort(centroids[idx, axis], kind="stable")]
        half = len(order) // 2
        left = self._build(order[:half], tri_lo, tri_hi, centroids)
        right = self._build(order[half:], tri_lo, tri_hi, centroids)
        self.children[node] = (left, right)
        return node

    def _box_hit(self, node: int, origin, inv, zero, t_max) -> bool:
        lo, hi = self.lo[node], self.hi[node]
        if np.any(zero & ((origin < lo) | (origin > hi))):
            return False
        with np.errstate(invalid="ignore", divide="ignore"):
            t1 = (lo - origin) * inv
            t2 = (hi - origin) * inv
        t_near = np.where(zero, -np.inf, np.minimum(t1, t2))
        t_far = np.where(zero, np.inf, np.maximum(t1, t2))
        return max(float(t_near.max()), 0.0) <= min(float(t_far.min()), t_max)

    def any_hit(self, origin: np.ndarray, direction: np.ndarray, t_max: float) -> bool:
        zero = direction == 0
        with np.errstate(divide="ignore"):
            inv = np.where(zero, np.inf, 1.0 / np.where(zero, 1.0, direction))
        stack = [0]
        while stack:
            node = stack.pop()
            if not self._box_hit(node, origin, inv, zero, t_max):
                continue
            items = self.items[node]
            if items is not None:
                if np.any(segment_hits(origin, direction, self.corners[items], t_max)):
                    return True
            else:
                stack.extend(self.children[node])
        return False


class _Occluder:
    def __init__(self, mesh: TriangleMesh, use_bvh: Optional[bool] = None):
        self.corners = mesh.corners
        if use_bvh is None:
            use_bvh = mesh.n_triangles > BVH_THRESHOLD
        self.bvh = TriangleBVH(self.corners) if use_bvh else None

    def blocked(self, start: np.ndarray, end: np.ndarray) -> bool:
        d = end - start
        length = float(np.linalg.norm(d))
        if length <= SELF_HIT_OFFSET_MM:
            return False
        direction = d / length
        origin = start + SELF_HIT_OFFSET_MM * direction
        t_max = length - SELF_HIT_OFFSET_MM
        if self.bvh is not None:
            return self.bvh.any_hit(origin, direction, t_max)
        return bool(np.any(segment_hits(origin, direction, self.corners, t_max)))


# ── visibility ──────────────────────────────────────────────────────────
class FeatureVisibility(BaseModel):
    label: str
    sensors: List[int]
    in_cone: List[int]
    status: str  # visible | shadowed | out_of_view


class VisibilityReport(BaseModel):
    features: List[FeatureVisibility]

    def visible_sets(self) -> Dict[str, Set[int]]:
        return {f.label: set(f.sensors) for f in self.features}

    @property
    def shadowed(self) -> List[str]:
        return [f.label for f in self.features if f.status == "shadowed"]


def _check_features_near_mesh(mesh: TriangleMesh, features: Sequence[FeaturePoint]):
    lo, hi = mesh.bounds()
    lo = lo - FEATURE_BOX_MARGIN_MM
    hi = hi + FEATURE_BOX_MARGIN_MM
    for f in features:
        p = np.asarray(f.position)
        if np.any(p < lo) or np.any(p > hi):
            raise FeatureOutsideMesh(f"Feature {f.label} lies outside the part's bounding box")


def visibility(mesh: TriangleMesh, features: Sequence[FeaturePoint], sensors: Sequence[SensorCone],
               use_bvh: Optional[bool] = None) -> VisibilityReport:
    """
    Sensor s sees feature f when f is inside s's light cone and the segment
    from f to the apex crosses no triangle of `mesh`.
    """
    if mesh.is_empty:
        raise EmptyMesh("Cannot compute visibility against an empty mesh")
    if not sensors:
        raise NoSensors("At least one sensor cone is required")
    _check_features_near_mesh(mesh, features)
    occluder = _Occluder(mesh, use_bvh)

    results = []
    for feature in features:
        p = np.asarray(feature.position, dtype=np.float64)
        in_cone, seen = [], []
        for s_idx, sensor in enumerate(sensors):
            if not sensor.contains(p):
                continue
            in_cone.append(s_idx)
            if not occluder.blocked(p, np.asarray(sensor.apex, dtype=np.float64)):
                seen.append(s_idx)
        if seen:
            status = "visible"
        elif in_cone:
            status = "shadowed"
        else:
            status = "out_of_view"
        results.append(FeatureVisibility(label=feature.label, sensors=seen, in_cone=in_cone, status=status))
    return VisibilityReport(features=results)


class StepVisibility(BaseModel):
    step: int
    angle_deg: float
    features: List[FeatureVisibility]


class CoverageReport(BaseModel):
    policy: str
    rotation_steps: int
    steps: List[StepVisibility]
    inspectable: Dict[str, bool]

    @property
    def all_inspectable(self) -> bool:
        return all(self.inspectable.values())


def _pair_visible(seen: Set[int], groups: Dict[str, List[int]]) -> bool:
    return any(len(members) >= 2 and set(members) <= seen for members in groups.values())


def coverage(mesh: TriangleMesh, features: Sequence[FeaturePoint], scanner: ScannerConfig,
             policy: str = "any", use_bvh: Optional[bool] = None) -> CoverageReport:
    """
    Evaluate visibility while the rotating plate turns the part about +Z.

    policy "any": a feature is inspectable if one sensor sees it at one step.
    policy "pair": both cameras of one sensor group must see it at the same step.
    """
    if policy not in ("any", "pair"):
        raise ValueError(f"Unknown coverage policy {policy!r}")
    center = scanner.cylinder.origin
    groups: Dict[str, List[int]] = {}
    for idx, sensor in enumerate(scanner.sensors):
        if sensor.group:
            groups.setdefault(sensor.group, []).append(idx)

    inspectable = {f.label: False for f in features}
    steps = []
    for step in range(scanner.rotation_steps):
        angle = 2.0 * math.pi * step / scanner.rotation_steps
        turned = mesh.rotated_z(angle, center) if step else mesh
        turned_features = []
        for f in features:
            pos = rotate_z(np.asarray([f.position]), angle, center)[0] if step else np.asarray(f.position)
            turned_features.append(FeaturePoint(label=f.label, position=tuple(float(c) for c in pos)))
        report = visibility(turned, turned_features, scanner.sensors, use_bvh=use_bvh)
        for fv in report.features:
            seen = set(fv.sensors)
            if policy == "any" and seen:
                inspectable[fv.label] = True
            elif policy == "pair" and _pair_visible(seen, groups):
                inspectable[fv.label] = True
        steps.append(StepVisibility(step=step, angle_deg=math.degrees(angle), features=report.features))

    hidden = [label for label, ok in inspectable.items() if not ok]
    if hidden:
        logger.info(f"⚠️ Not inspectable under policy {policy}: {', '.join(hidden)}")
    return CoverageReport(policy=policy, rotation_steps=scanner.rotation_steps, steps=steps, inspectable=inspectable)


# ── scan deviation ──────────────────────────────────────────────────────
class DeviationSummary(BaseModel):
    mean: float
    max: float
    rms: float
    min_signed: float
    max_signed: float
    n_points: int


def closest_points_on_triangles(point: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Closest point on each triangle to `point`; shape (m, 3)."""
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    n = np.cross(b - a, c - a)
    nn = np.einsum("ij,ij->i", n, n)
    height = np.einsum("ij,ij->i", point - a, n) / nn
    q = point - height[:, None] * n
    inside = (
        (np.einsum("ij,ij->i", np.cross(b - a, q - a), n) >= 0)
        & (np.einsum("ij,ij->i", np.cross(c - b, q - b), n) >= 0)
        & (np.einsum("ij,ij->i", np.cross(a - c, q - c), n) >= 0)
    )
    best = None
    best_d2 = None
    for s0, s1 in ((a, b), (b, c), (c, a)):
        e = s1 - s0
        t = np.clip(np.einsum("ij,ij->i", point - s0, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
        cand = s0 + t[:, None] * e
        d2 = np.einsum("ij,ij->i", point - cand, point - cand)
        if best is None:
            best, best_d2 = cand, d2
        else:
            closer = d2 < best_d2
            best = np.where(closer[:, None], cand, best)
            best_d2 = np.where(closer, d2, best_d2)
    return np.where(inside[:, None], q, best)


def scan_deviation(scan, reference: TriangleMesh) -> Tuple[np.ndarray, DeviationSummary]:
    """
    Signed distance from each scan point to the reference surface.

    The sign follows the normal of the nearest reference triangle: positive
    outside (along the normal), negative inside. Scan and CAD are assumed
    pre-aligned.
    """
    points = np.asarray(scan, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise EmptyScan("Scan point cloud is empty")
    if reference.is_empty:
        raise EmptyMesh("Reference mesh is empty")
    corners = reference.corners
    normals = reference.face_normals
    signed = np.empty(len(points))
    for i, p in enumerate(points):
        closest = closest_points_on_triangles(p, corners)
        diff = p - closest
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        k = int(np.argmin(dist))
        side = float(np.dot(diff[k], normals[k]))
        signed[i] = dist[k] if side >= 0 else -dist[k]
    magnitude = np.abs(signed)
    summary = DeviationSummary(
        mean=float(signed.mean()),
        max=float(magnitude.max()),
        rms=float(np.sqrt(np.mean(signed ** 2))),
        min_signed=float(signed.min()),
        max_signed=float(signed.max()),
        n_points=len(points),
    )
    return signed, summary
