import csv

import numpy as np
import pytest

from halfscat.errors import DippingProfileError, SceneConfigError
from halfscat.geometry import (
    GROUND_PLANE,
    Plane,
    build_profile,
    export_mesh_csv,
    mesh_perturbation,
    mirror,
)


def pyramid_heights(apex=0.5, m=9):
    g = np.zeros((m, m))
    g[m // 2, m // 2] = apex
    return g.tolist()


class TestBuildProfile:
    def test_zero_profile(self):
        prof = build_profile({"kind": "zero", "R": 1.0})
        assert prof.max_slope == 0.0
        pts = np.array([[0.0, 0.0], [0.5, 0.2], [2.0, 0.0]])
        assert np.all(prof.height(pts) == 0.0)

    def test_gaussian_bump_values(self):
        prof = build_profile(
            {"kind": "gaussian_bump", "R": 1.0, "amplitude": 0.3, "width": 0.25}
        )
        assert prof.height(np.array([0.0, 0.0])) == pytest.approx(0.3, abs=0.0)
        # exactly zero on and outside the support rim
        assert prof.height(np.array([1.0, 0.0])) == 0.0
        assert prof.height(np.array([0.0, -1.0])) == 0.0
        assert prof.height(np.array([1.7, 0.4])) == 0.0

    def test_pyramid_max_slope_brute_force(self):
        # independent oracle: rebuild every facet's plane from its three node
        # heights with a linear solve and take the steepest gradient
        prof = build_profile(
            {"kind": "piecewise_linear", "R": 1.0, "heights": pyramid_heights()}
        )
        xs = prof.node_xs
        h = np.asarray(prof.heights)
        worst = 0.0
        for i in range(8):
            for j in range(8):
                a = (xs[i], xs[j], h[i, j])
                b = (xs[i + 1], xs[j], h[i + 1, j])
                c = (xs[i + 1], xs[j + 1], h[i + 1, j + 1])
                d = (xs[i], xs[j + 1], h[i, j + 1])
                facets = ((a, b, c), (a, c, d)) if (i + j) % 2 == 0 else ((a, b, d), (b, c, d))
                for p0, p1, p2 in facets:
                    A = np.array([[p0[0], p0[1], 1.0], [p1[0], p1[1], 1.0], [p2[0], p2[1], 1.0]])
                    gx, gy, _ = np.linalg.solve(A, np.array([p0[2], p1[2], p2[2]]))
                    worst = max(worst, float(np.hypot(gx, gy)))
        assert prof.max_slope == pytest.approx(worst, rel=1e-12)
        # apex height over one node spacing (2R/8 = 0.25)
        assert worst == pytest.approx(0.5 / 0.25, rel=1e-12)

    def test_pl_interpolation_matches_nodes(self):
        prof = build_profile(
            {"kind": "piecewise_linear", "R": 1.0, "heights": pyramid_heights()}
        )
        assert prof.height(np.array([0.0, 0.0])) == pytest.approx(0.5)
        # halfway along the axis toward a zero node
        assert prof.height(np.array([0.125, 0.0])) == pytest.approx(0.25)

    def test_rejects_bad_inputs(self):
        with pytest.raises(SceneConfigError, match="profile.R"):
            build_profile({"kind": "zero", "R": -1.0})
        with pytest.raises(SceneConfigError, match="kind"):
            build_profile({"kind": "paraboloid", "R": 1.0})
        with pytest.raises(SceneConfigError, match="unknown key"):
            build_profile({"kind": "zero", "R": 1.0, "amplitude": 0.1})
        heights = pyramid_heights()
        heights[0][3] = 0.2  # boundary ring must stay flat
        with pytest.raises(SceneConfigError, match="boundary-ring"):
            build_profile({"kind": "piecewise_linear", "R": 1.0, "heights": heights})
        heights = pyramid_heights()
        heights[4][4] = float("nan")
        with pytest.raises(SceneConfigError, match="NaN"):
            build_profile({"kind": "piecewise_linear", "R": 1.0, "heights": heights})

    def test_dip_rejected_unless_allowed(self):
        spec = {"kind": "gaussian_bump", "R": 1.0, "amplitude": -0.2, "width": 0.25}
        with pytest.raises(DippingProfileError):
            build_profile(spec)
        prof = build_profile({**spec, "allow_dip": True})
        assert prof.allow_dip

    def test_nonzero_node_too_close_to_rim(self):
        heights = np.zeros((9, 9))
        heights[1][4] = 0.1  # inside the boundary ring but support leaks past R
        with pytest.raises(SceneConfigError, match="support rim"):
            build_profile(
                {"kind": "piecewise_linear", "R": 1.0, "heights": heights.tolist()}
            )


class TestMesh:
    def test_flat_mesh_normals_exact(self):
        mesh = mesh_perturbation(build_profile({"kind": "zero", "R": 1.0}), 0.25)
        assert np.all(mesh.normals == np.array([0.0, 0.0, 1.0]))
        assert np.all(mesh.vertices[:, 2] == 0.0)

    def test_flat_mesh_area_is_inscribed_polygon(self):
        # the triangulation covers the inscribed polygon of the outer ring
        # exactly; pi R^2 is the continuum limit from below
        mesh = mesh_perturbation(build_profile({"kind": "zero", "R": 1.0}), 0.25)
        m = 6 * mesh.n_rings
        polygon = 0.5 * m * np.sin(2 * np.pi / m)
        assert mesh.total_area == pytest.approx(polygon, rel=1e-12)
        assert mesh.total_area < np.pi

    def test_bump_mesh_area_exceeds_disc(self):
        prof = build_profile(
            {"kind": "gaussian_bump", "R": 1.0, "amplitude": 0.3, "width": 0.25}
        )
        flat = mesh_perturbation(build_profile({"kind": "zero", "R": 1.0}), 0.1)
        bump = mesh_perturbation(prof, 0.1)
        assert bump.total_area >= np.pi
        assert bump.total_area > flat.total_area

    def test_refinement_quadruples_panels(self):
        prof = build_profile({"kind": "zero", "R": 1.0})
        n1 = mesh_perturbation(prof, 0.25).n_panels
        n2 = mesh_perturbation(prof, 0.125).n_panels
        assert 3.5 <= n2 / n1 <= 4.5

    def test_vertices_on_graph_and_rim_flat(self):
        prof = build_profile(
            {"kind": "piecewise_linear", "R": 1.0, "heights": pyramid_heights()}
        )
        mesh = mesh_perturbation(prof, 0.1)
        expected = prof.height(mesh.vertices[:, :2])
        rim = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1]) >= 1.0 - 1e-12
        assert np.all(mesh.vertices[rim, 2] == 0.0)
        inner = ~rim
        assert np.array_equal(mesh.vertices[inner, 2], expected[inner])

    def test_area_refinement_converges(self):
        prof = build_profile(
            {"kind": "gaussian_bump", "R": 1.0, "amplitude": 0.3, "width": 0.25}
        )
        areas = [mesh_perturbation(prof, h).total_area for h in (0.25, 0.125, 0.0625)]
        gaps = np.abs(np.diff(areas))
        assert gaps[1] < gaps[0]

    def test_mesh_validation(self):
        prof = build_profile({"kind": "zero", "R": 1.0})
        with pytest.raises(ValueError, match="target_h"):
            mesh_perturbation(prof, 0.3)  # > R/4
        with pytest.raises(ValueError, match="target_h"):
            mesh_perturbation(prof, 0.0)
        dipped = build_profile(
            {"kind": "gaussian_bump", "R": 1.0, "amplitude": -0.2, "width": 0.25,
             "allow_dip": True}
        )
        with pytest.raises(DippingProfileError):
            mesh_perturbation(dipped, 0.1)

    def test_hashes_identify_grid_and_content(self):
        flat = build_profile({"kind": "zero", "R": 1.0})
        bump = build_profile(
            {"kind": "gaussian_bump", "R": 1.0, "amplitude": 0.3, "width": 0.25}
        )
        m1 = mesh_perturbation(flat, 0.125)
        m2 = mesh_perturbation(bump, 0.125)
        m3 = mesh_perturbation(bump, 0.25)
        assert m1.grid_hash == m2.grid_hash  # same discretization rule
        assert m1.content_hash != m2.content_hash  # different surfaces
        assert m2.grid_hash != m3.grid_hash

    def test_export_csv(self, tmp_path):
        mesh = mesh_perturbation(build_profile({"kind": "zero", "R": 1.0}), 0.25)
        path = tmp_path / "mesh.csv"
        export_mesh_csv(mesh, path, scene_hash="cafe01")
        lines = path.read_text().splitlines()
        assert lines[0] == "# scene=cafe01"
        header = lines[1].split(",")
        assert header[:2] == ["panel_id", "v1x"] and header[-1] == "nz"
        assert len(lines) == 2 + mesh.n_panels


class TestMirror:
    def test_ground_plane_example(self):
        assert np.array_equal(mirror(np.array([1.0, 2.0, 3.0])), [1.0, 2.0, -3.0])

    def test_involution_and_fixed_points(self):
        rng = np.random.default_rng(11)
        plane = Plane(point=(0.3, -0.2, 0.5), normal=(1.0, 2.0, -0.5))
        for _ in range(25):
            x = rng.normal(size=3) * 3
            assert np.allclose(mirror(mirror(x, plane), plane), x, atol=1e-13)
        # a point on the plane maps to itself
        t = plane.point + np.array([2.0, -1.0, 0.0]) - (
            (np.array([2.0, -1.0, 0.0]) @ plane.normal) * plane.normal
        )
        assert np.allclose(mirror(t, plane), t, atol=1e-13)

    def test_isometry(self):
        rng = np.random.default_rng(12)
        plane = Plane(point=(0.0, 0.1, -0.4), normal=(0.3, -1.0, 2.0))
        for _ in range(100):
            x, y = rng.normal(size=(2, 3)) * 5
            d0 = np.linalg.norm(x - y)
            d1 = np.linalg.norm(mirror(x, plane) - mirror(y, plane))
            assert abs(d0 - d1) <= 1e-13 * max(1.0, d0)

    def test_vectorized(self):
        pts = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0], [-1.0, 0.5, -2.0]])
        out = mirror(pts)
        assert np.array_equal(out, pts * np.array([1.0, 1.0, -1.0]))


class TestPlane:
    def test_normal_normalized(self):
        plane = Plane(point=(0, 0, 0), normal=(0, 0, 5.0))
        assert abs(np.linalg.norm(plane.normal) - 1.0) <= 1e-14

    def test_zero_normal_rejected(self):
        with pytest.raises(ValueError):
            Plane(point=(0, 0, 0), normal=(0, 0, 0))

    def test_from_graph_coeffs(self):
        # facet x3 = A x1 + B x2 + C has upward normal (-A, -B, 1)/sqrt(A^2+B^2+1)
        A, B, C = 0.5, -0.3, 0.2
        plane = Plane.from_graph_coeffs(A, B, C)
        h = np.sqrt(A**2 + B**2 + 1.0)
        assert np.allclose(plane.normal, np.array([-A, -B, 1.0]) / h, atol=1e-15)
        for x1, x2 in ((0.0, 0.0), (1.3, -0.7)):
            x = np.array([x1, x2, A * x1 + B * x2 + C])
            assert abs((x - plane.point) @ plane.normal) <= 1e-14

    def test_ground_plane_constant(self):
        assert np.array_equal(GROUND_PLANE.normal, [0.0, 0.0, 1.0])
