# test_inspect_geom.py
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from errors import DegenerateTriangle, EmptyMesh, EmptyScan, FeatureOutsideMesh, NoSensors
from inspect_geom import (
    FeaturePoint,
    InspectionCylinder,
    ScannerConfig,
    SensorCone,
    TriangleBVH,
    TriangleMesh,
    box_mesh,
    check_containment,
    coverage,
    cylinder_mesh,
    plate_mesh,
    scan_deviation,
    segment_hits,
    visibility,
)
from mesh_io import load_features, load_mesh, load_scanner_config

BOX = box_mesh((-5.0, -5.0, 0.0), (5.0, 5.0, 10.0))


def _cone(apex, axis, degrees=30.0, **kw):
    return SensorCone.from_degrees(apex=apex, axis=axis, half_angle_deg=degrees, **kw)


class TestMesh:
    def test_cylinder_is_closed_and_outward(self):
        mesh = cylinder_mesh(12.7, 90.0, base_z=2.0)
        assert mesh.n_triangles == 128
        centroids = mesh.corners.mean(axis=1) - np.array([0.0, 0.0, 47.0])
        assert np.all(np.einsum("ij,ij->i", centroids, mesh.face_normals) > 0)
        # closed: every edge is shared by exactly two triangles
        edges = np.sort(np.concatenate([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]],
                                        mesh.triangles[:, [2, 0]]]), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        assert set(counts.tolist()) == {2}

    def test_degenerate_triangles(self):
        with pytest.raises(DegenerateTriangle):
            TriangleMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
        assert TriangleMesh.from_raw([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]]).is_empty

    def test_vertex_normals_of_a_box_point_out_of_the_corners(self):
        normals = box_mesh((0, 0, 0), (1, 1, 1)).vertex_normals()
        assert np.allclose(np.linalg.norm(normals, axis=1), 1.0)
        assert np.all(normals[6] > 0)


class TestContainment:
    cyl = InspectionCylinder()

    def test_bolt_fits(self):
        report = check_containment(cylinder_mesh(12.7, 90.0, base_z=2.0), self.cyl)
        assert report.fully_inside
        assert report.max_radial_mm == pytest.approx(12.7)
        assert (report.min_z_mm, report.max_z_mm) == (2.0, 92.0)

    @pytest.mark.parametrize(
        "mesh, constraint",
        [
            (cylinder_mesh(12.7, 90.0, base_z=2.0).translated((95.0, 0.0, 0.0)), "radial"),
            (cylinder_mesh(12.7, 105.0), "above_top"),
            (cylinder_mesh(12.7, 50.0, base_z=-1.0), "below_base"),
        ],
    )
    def test_violations(self, mesh, constraint):
        report = check_containment(mesh, self.cyl)
        assert not report.fully_inside
        assert all(constraint in v.constraints for v in report.violating_vertices)

    def test_empty(self):
        with pytest.raises(EmptyMesh):
            check_containment(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3))), self.cyl)

    @settings(max_examples=50, deadline=None)
    @given(st.tuples(*[st.floats(-500, 500, allow_nan=False)] * 3))
    def test_translating_part_and_volume_together_changes_nothing(self, offset):
        mesh = cylinder_mesh(12.7, 90.0, base_z=2.0).translated((50.0, 0.0, 0.0))
        moved = check_containment(mesh.translated(offset), InspectionCylinder(origin=offset))
        base = check_containment(mesh, self.cyl)
        assert moved.fully_inside == base.fully_inside
        assert moved.max_radial_mm == pytest.approx(base.max_radial_mm, abs=1e-6)


def _moller_trumbore(origin, direction, tri, t_max):
    """Reference ray/triangle test; None when the ray grazes an edge or an end."""
    a, b, c = tri
    e1, e2 = b - a, c - a
    p = np.cross(direction, e2)
    det = np.dot(e1, p)
    if abs(det) < 1e-12:
        return None
    s = origin - a
    u = np.dot(s, p) / det
    q = np.cross(s, e1)
    v = np.dot(direction, q) / det
    t = np.dot(e2, q) / det
    if min(abs(u), abs(v), abs(1 - u - v), abs(t), abs(t - t_max)) < 1e-7:
        return None
    return u > 0 and v > 0 and u + v < 1 and 0 < t < t_max


class TestRayCasting:
    def test_matches_a_reference_implementation(self):
        rng = np.random.default_rng(11)
        corners = rng.uniform(-10, 10, size=(200, 3, 3))
        checked = 0
        for _ in range(100):
            origin = rng.uniform(-15, 15, size=3)
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            t_max = float(rng.uniform(1, 30))
            got = segment_hits(origin, direction, corners, t_max)
            for k, tri in enumerate(corners):
                expected = _moller_trumbore(origin, direction, tri, t_max)
                if expected is not None:
                    assert bool(got[k]) == expected
                    checked += 1
        assert checked > 19_000

    def test_shared_edge_is_hit_at_least_once(self):
        square = box_mesh((0, 0, 0), (1, 1, 1)).corners[2:4]  # top face, split along its diagonal
        origin = np.array([0.5, 0.5, 5.0])
        assert segment_hits(origin, np.array([0.0, 0.0, -1.0]), square, 10.0).any()

    def test_bvh_agrees_with_brute_force(self):
        mesh = TriangleMesh.merged([cylinder_mesh(10.0, 50.0, segments=400), BOX.translated((30, 0, 0))])
        bvh = TriangleBVH(mesh.corners)
        rng = np.random.default_rng(3)
        for _ in range(300):
            start = rng.uniform(-40, 40, size=3)
            end = rng.uniform(-40, 40, size=3)
            if rng.random() < 0.2:
                end[:2] = start[:2]
            d = end - start
            length = float(np.linalg.norm(d))
            direction = d / length
            expected = bool(segment_hits(start, direction, mesh.corners, length).any())
            assert bvh.any_hit(start, direction, length) == expected


class TestVisibility:
    top = FeaturePoint(label="top", position=(1.0, 2.0, 10.0))
    side = FeaturePoint(label="side", position=(5.0, 1.0, 6.0))

    def test_visible_shadowed_out_of_view(self):
        sensors = [
            _cone((0, 0, 50), (0, 0, -1)),
            _cone((-50, 1, 6), (1, 0, 0)),
            _cone((0, 0, 50), (0, 0, 1)),
        ]
        report = visibility(BOX, [self.top, self.side], sensors)
        top, side = report.features
        assert (top.status, top.sensors) == ("visible", [0])
        assert (side.status, side.in_cone, side.sensors) == ("shadowed", [0, 1], [])
        assert report.shadowed == ["side"]
        assert report.visible_sets() == {"top": {0}, "side": set()}

        far = visibility(BOX, [self.top], [sensors[2]])
        assert far.features[0].status == "out_of_view"

    def test_plate_between_sensor_and_feature_blocks_it(self):
        sensor = _cone((0, 0, 50), (0, 0, -1))
        assert visibility(BOX, [self.top], [sensor]).features[0].status == "visible"
        shielded = TriangleMesh.merged([BOX, plate_mesh((0, 0, 30), 20)])
        assert visibility(shielded, [self.top], [sensor]).features[0].status == "shadowed"

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(-20, 20), st.floats(-20, 20), st.floats(12, 45), st.floats(1, 30),
    )
    def test_adding_an_occluder_never_reveals_a_feature(self, x, y, z, size):
        sensors = [
            _cone((0, 0, 50), (0, 0, -1)),
            _cone((-50, 1, 6), (1, 0, 0)),
            _cone((30, 30, 40), (-30, -30, -35), degrees=40.0),
        ]
        corner = FeaturePoint(label="corner", position=(5.0, 5.0, 10.0))
        features = [self.top, self.side, corner]
        bare = visibility(BOX, features, sensors).visible_sets()
        shielded = visibility(TriangleMesh.merged([BOX, plate_mesh((x, y, z), size)]), features, sensors)
        for label, seen in shielded.visible_sets().items():
            assert seen <= bare[label]

    def test_bvh_gives_the_same_answer(self, data_dir):
        mesh = load_mesh(data_dir / "bolt_synthetic.stl")
        features = load_features(data_dir / "bolt_features.csv")
        sensors = load_scanner_config(data_dir / "scanner_default.json").sensors
        assert visibility(mesh, features, sensors, use_bvh=True) == visibility(mesh, features, sensors, use_bvh=False)

    def test_errors(self):
        sensor = _cone((0, 0, 50), (0, 0, -1))
        with pytest.raises(NoSensors):
            visibility(BOX, [self.top], [])
        with pytest.raises(EmptyMesh):
            visibility(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3))), [self.top], [sensor])
        with pytest.raises(FeatureOutsideMesh):
            visibility(BOX, [FeaturePoint(label="far", position=(0, 0, 40))], [sensor])

    def test_cone_half_angle_must_be_acute(self):
        with pytest.raises(ValidationError):
            _cone((0, 0, 0), (0, 0, 1), degrees=90.0)
        assert not _cone((0, 0, 0), (0, 0, 1)).contains(np.zeros(3))


class TestCoverage:
    def test_pair_policy_needs_both_cameras(self):
        feature = FeaturePoint(label="top", position=(1.0, 2.0, 10.0))
        scanner = ScannerConfig(sensors=[
            _cone((0, 0, 50), (0, 0, -1), group="A"),
            _cone((0, 0, -50), (0, 0, 1), group="A"),
        ], rotation_steps=1)
        assert coverage(BOX, [feature], scanner, policy="any").inspectable == {"top": True}
        assert coverage(BOX, [feature], scanner, policy="pair").inspectable == {"top": False}

    def test_rotation_brings_hidden_side_into_view(self):
        feature = FeaturePoint(label="side", position=(5.0, 1.0, 6.0))
        sensor = _cone((-50, 1, 6), (1, 0, 0), degrees=20.0)
        fixed = coverage(BOX, [feature], ScannerConfig(sensors=[sensor], rotation_steps=1))
        turning = coverage(BOX, [feature], ScannerConfig(sensors=[sensor], rotation_steps=2))
        assert not fixed.all_inspectable
        assert turning.all_inspectable
        assert [s.angle_deg for s in turning.steps] == [0.0, 180.0]
        assert turning.steps[1].features[0].sensors == [0]

    def test_bundled_cell_sees_every_bolt_feature(self, data_dir):
        mesh = load_mesh(data_dir / "bolt_synthetic.stl")
        features = load_features(data_dir / "bolt_features.csv")
        scanner = load_scanner_config(data_dir / "scanner_default.json")
        for policy in ("any", "pair"):
            assert coverage(mesh, features, scanner, policy=policy).all_inspectable

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            coverage(BOX, [], ScannerConfig(sensors=[_cone((0, 0, 50), (0, 0, -1))]), policy="most")


def _box_signed_distance(p, lo, hi):
    outside = np.maximum(np.maximum(lo - p, p - hi), 0.0)
    if outside.any():
        return float(np.linalg.norm(outside))
    return -float(min(np.min(p - lo), np.min(hi - p)))


def _closest_on_triangle(p, a, b, c):
    """Closest point by Voronoi region of the triangle (vertex, edge or face)."""
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return a
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        return a + d1 / (d1 - d3) * ab
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        return a + d2 / (d2 - d6) * ac
    va = d3 * d6 - d5 * d4
    if va <= 0 and d4 - d3 >= 0 and d5 - d6 >= 0:
        return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b)
    denom = va + vb + vc
    return a + ab * (vb / denom) + ac * (vc / denom)


class TestScanDeviation:
    cube = box_mesh((0, 0, 0), (10, 10, 10))

    def test_self_deviation_is_zero(self):
        mesh = cylinder_mesh(12.7, 90.0)
        _, summary = scan_deviation(mesh.vertices, mesh)
        assert summary.max == pytest.approx(0.0, abs=1e-9)
        assert summary.n_points == len(mesh.vertices)

    @pytest.mark.parametrize("offset", [0.05, -0.05])
    def test_uniform_offset_of_a_cube(self, offset):
        centers = np.array([[10, 5, 5], [0, 5, 5], [5, 10, 5], [5, 0, 5], [5, 5, 10], [5, 5, 0]], dtype=float)
        normals = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
        signed, summary = scan_deviation(centers + offset * normals, self.cube)
        assert np.allclose(signed, offset)
        assert summary.mean == pytest.approx(offset)
        assert summary.rms == pytest.approx(0.05)
        assert summary.max == pytest.approx(0.05)

    def test_matches_exact_box_distance(self):
        rng = np.random.default_rng(5)
        points = rng.uniform(-5, 15, size=(200, 3))
        signed, _ = scan_deviation(points, self.cube)
        lo, hi = np.zeros(3), np.full(3, 10.0)
        expected = [_box_signed_distance(p, lo, hi) for p in points]
        assert np.allclose(signed, expected, atol=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.tuples(*[st.floats(-100, 100, allow_nan=False)] * 3))
    def test_translation_covariance(self, offset):
        points = np.array([[12.0, 3.0, 4.0], [5.0, 5.0, 9.0], [-1.0, 2.0, 2.0]])
        base, _ = scan_deviation(points, self.cube)
        moved, _ = scan_deviation(points + np.asarray(offset), self.cube.translated(offset))
        assert np.allclose(base, moved, atol=1e-9)

    def test_errors(self):
        with pytest.raises(EmptyScan):
            scan_deviation(np.zeros((0, 3)), self.cube)
        with pytest.raises(EmptyMesh):
            scan_deviation([[0, 0, 0]], TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3))))

    @pytest.mark.parametrize("mesh", [box_mesh((0, 0, 0), (10, 10, 10)), box_mesh((-2, 1, 3), (4, 2, 30)),
                                      cylinder_mesh(5.0, 20.0, segments=8), cylinder_mesh(12.7, 90.0)],
                             ids=["cube", "slab", "octagon", "bolt"])
    def test_vertices_pushed_along_their_normals(self, mesh):
        normals = mesh.vertex_normals()
        outward, _ = scan_deviation(mesh.vertices + 0.05 * normals, mesh)
        assert np.allclose(outward, 0.05, atol=1e-9)
        inward, _ = scan_deviation(mesh.vertices - 0.05 * normals, mesh)
        assert np.all(inward < 0)
        assert np.all(-inward <= 0.05 + 1e-9)

    def test_matches_brute_force_on_random_triangle_soups(self):
        rng = np.random.default_rng(23)
        for _ in range(6):
            m = int(rng.integers(1, 501))
            corners = rng.uniform(-20, 20, size=(m, 1, 3)) + rng.uniform(-3, 3, size=(m, 3, 3))
            mesh = TriangleMesh.from_raw(corners.reshape(-1, 3), np.arange(3 * m).reshape(m, 3))
            points = rng.uniform(-25, 25, size=(15, 3))
            signed, _ = scan_deviation(points, mesh)
            expected = [min(np.linalg.norm(p - _closest_on_triangle(p, *tri)) for tri in mesh.corners)
                        for p in points]
            assert np.allclose(np.abs(signed), expected, rtol=0, atol=1e-9)
