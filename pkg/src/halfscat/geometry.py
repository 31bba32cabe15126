"""Locally perturbed ground-plane geometry: height profiles, panel meshes, mirrors.

The scattering surface is the graph ``x3 = f(x1, x2)`` of a Lipschitz height
function supported in the disc ``|x~| <= R``; outside that disc the surface is
the flat ground plane ``x3 = 0``.  Only the perturbed disc is ever meshed: the
half-space kernels satisfy the boundary condition on the flat part exactly.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DippingProfileError, SceneConfigError

_MIRROR = np.array([1.0, 1.0, -1.0])

PROFILE_KINDS = ("zero", "gaussian_bump", "piecewise_linear")


def _reject_unknown(leftover: dict, where: str) -> None:
    if leftover:
        key = sorted(leftover)[0]
        raise SceneConfigError(f"{where}.{key}", "unknown key")


def _hash_arrays(*arrays, tag: str = "") -> str:
    sha = hashlib.sha256(tag.encode())
    for a in arrays:
        a = np.ascontiguousarray(a)
        sha.update(str(a.shape).encode())
        sha.update(a.tobytes())
    return sha.hexdigest()[:16]


@dataclass(frozen=True)
class SurfaceProfile:
    """Height function of the perturbation, zero outside the disc of radius R.

    ``heights``/``node_xs`` are only populated for the piecewise-linear kind
    (square node grid over ``[-R, R]^2``, cells split along the lower-left to
    upper-right diagonal).  ``max_slope`` is the maximum facet slope for
    piecewise-linear profiles and the maximum radial derivative otherwise.
    """

    kind: str
    support_radius: float
    amplitude: float = 0.0
    width: float = 0.0
    heights: np.ndarray | None = None
    node_xs: np.ndarray | None = None
    allow_dip: bool = False
    max_slope: float = field(default=0.0, compare=False)

    @property
    def peak_height(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "gaussian_bump":
            return max(self.amplitude, 0.0)
        return float(np.max(self.heights))

    def height(self, xy: np.ndarray) -> np.ndarray:
        """Evaluate f at points ``xy`` of shape (..., 2)."""
        xy = np.asarray(xy, dtype=float)
        r2 = xy[..., 0] ** 2 + xy[..., 1] ** 2
        R = self.support_radius
        if self.kind == "zero":
            return np.zeros(xy.shape[:-1])
        if self.kind == "gaussian_bump":
            s2 = 2.0 * self.width**2
            floor = math.exp(-(R**2) / s2)
            vals = self.amplitude * (np.exp(-r2 / s2) - floor) / (1.0 - floor)
            return np.where(r2 < R**2, vals, 0.0)
        return self._interp_linear(xy)

    def _interp_linear(self, xy: np.ndarray) -> np.ndarray:
        # union-jack split: cells alternate their diagonal with the parity of
        # i+j, so a lone peaked node yields facets of slope height/spacing
        xs = self.node_xs
        h = self.heights
        delta = xs[1] - xs[0]
        m = xs.size
        u = (xy[..., 0] - xs[0]) / delta
        v = (xy[..., 1] - xs[0]) / delta
        inside = (u >= 0) & (u <= m - 1) & (v >= 0) & (v <= m - 1)
        i = np.clip(np.floor(u).astype(int), 0, m - 2)
        j = np.clip(np.floor(v).astype(int), 0, m - 2)
        lu = np.clip(u - i, 0.0, 1.0)
        lv = np.clip(v - j, 0.0, 1.0)
        hA = h[i, j]
        hB = h[i + 1, j]
        hC = h[i + 1, j + 1]
        hD = h[i, j + 1]
        even = (i + j) % 2 == 0
        even_vals = np.where(
            lu >= lv,
            hA + (hB - hA) * lu + (hC - hB) * lv,
            hA + (hC - hD) * lu + (hD - hA) * lv,
        )
        odd_vals = np.where(
            lu + lv <= 1.0,
            hA + (hB - hA) * lu + (hD - hA) * lv,
            hC + (hD - hC) * (1.0 - lu) + (hB - hC) * (1.0 - lv),
        )
        vals = np.where(even, even_vals, odd_vals)
        r2 = xy[..., 0] ** 2 + xy[..., 1] ** 2
        return np.where(inside & (r2 < self.support_radius**2), vals, 0.0)


def _pl_max_slope(node_xs: np.ndarray, heights: np.ndarray) -> float:
    # brute force over both facets of every cell, honoring the union-jack split
    delta = node_xs[1] - node_xs[0]
    hA = heights[:-1, :-1]
    hB = heights[1:, :-1]
    hC = heights[1:, 1:]
    hD = heights[:-1, 1:]
    m = heights.shape[0] - 1
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    even = (ii + jj) % 2 == 0
    g1 = np.where(even, np.hypot(hB - hA, hC - hB), np.hypot(hB - hA, hD - hA)) / delta
    g2 = np.where(even, np.hypot(hC - hD, hD - hA), np.hypot(hC - hD, hC - hB)) / delta
    return float(max(g1.max(), g2.max()))


def _gaussian_max_slope(a: float, sigma: float, R: float) -> float:
    floor = math.exp(-(R**2) / (2 * sigma**2))
    r = np.linspace(0.0, R, 4097)
    slope = abs(a) * (r / sigma**2) * np.exp(-(r**2) / (2 * sigma**2)) / (1.0 - floor)
    return float(slope.max())


def build_profile(spec: dict) -> SurfaceProfile:
    """Validate a profile description and build the height function.

    ``spec`` keys: ``kind`` plus ``R`` (> 0); ``gaussian_bump`` takes
    ``amplitude`` and ``width``; ``piecewise_linear`` takes ``heights``
    (square list/array of node heights on the grid over ``[-R, R]^2``).
    ``allow_dip`` accepts negative heights, which every solver path refuses.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in PROFILE_KINDS:
        raise SceneConfigError("profile.kind", f"expected one of {PROFILE_KINDS}, got {kind!r}")
    R = spec.pop("R", None)
    if R is None or not np.isfinite(R) or R <= 0:
        raise SceneConfigError("profile.R", f"support radius must be finite and > 0, got {R!r}")
    R = float(R)
    allow_dip = bool(spec.pop("allow_dip", False))

    if kind == "zero":
        _reject_unknown(spec, "profile")
        return SurfaceProfile(kind="zero", support_radius=R, max_slope=0.0)

    if kind == "gaussian_bump":
        a = spec.pop("amplitude", None)
        sigma = spec.pop("width", None)
        _reject_unknown(spec, "profile")
        if a is None or not np.isfinite(a):
            raise SceneConfigError("profile.amplitude", f"finite amplitude required, got {a!r}")
        if sigma is None or not np.isfinite(sigma) or sigma <= 0:
            raise SceneConfigError("profile.width", f"width must be finite and > 0, got {sigma!r}")
        if a < 0 and not allow_dip:
            raise DippingProfileError(
                "gaussian_bump amplitude < 0 dips below the ground plane; "
                "set allow_dip to construct it anyway (solvers will refuse it)"
            )
        return SurfaceProfile(
            kind="gaussian_bump",
            support_radius=R,
            amplitude=float(a),
            width=float(sigma),
            allow_dip=allow_dip,
            max_slope=_gaussian_max_slope(a, sigma, R),
        )

    raw = spec.pop("heights", None)
    _reject_unknown(spec, "profile")
    if raw is None:
        raise SceneConfigError("profile.heights", "piecewise_linear profile requires node heights")
    heights = np.array(raw, dtype=float)
    if heights.ndim != 2 or heights.shape[0] != heights.shape[1] or heights.shape[0] < 3:
        raise SceneConfigError(
            "profile.heights", f"square node grid of size >= 3 required, got shape {heights.shape}"
        )
    if np.isnan(heights).any():
        raise SceneConfigError("profile.heights", "NaN height")
    m = heights.shape[0]
    boundary = np.concatenate([heights[0], heights[-1], heights[:, 0], heights[:, -1]])
    if np.any(boundary != 0.0):
        raise SceneConfigError("profile.heights", "boundary-ring heights must all be zero")
    if np.any(heights < 0) and not allow_dip:
        raise DippingProfileError(
            "negative node heights dip below the ground plane; "
            "set allow_dip to construct the profile anyway (solvers will refuse it)"
        )
    node_xs = np.linspace(-R, R, m)
    # compact support: a nonzero node whose support cells touch |x~| >= R would
    # push f outside the disc, so keep nonzero nodes a cell diagonal inside
    delta = node_xs[1] - node_xs[0]
    nx, ny = np.meshgrid(node_xs, node_xs, indexing="ij")
    rnode = np.hypot(nx, ny)
    bad = (heights != 0.0) & (rnode > R - math.sqrt(2.0) * delta)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise SceneConfigError(
            "profile.heights",
            f"node ({i},{j}) at |x~|={rnode[i, j]:.4g} is nonzero but too close to the "
            f"support rim |x~|={R:g}; nonzero nodes must satisfy |x~| <= R - sqrt(2)*spacing",
        )
    heights = heights.copy()
    heights.setflags(write=False)
    node_xs.setflags(write=False)
    return SurfaceProfile(
        kind="piecewise_linear",
        support_radius=R,
        heights=heights,
        node_xs=node_xs,
        allow_dip=allow_dip,
        max_slope=_pl_max_slope(node_xs, heights),
    )


@dataclass(frozen=True)
class PanelMesh:
    """Flat-triangle mesh of the perturbed disc, lifted to the graph of f.

    ``vertices``/``triangles`` give the structured ring triangulation;
    centroids, areas and upward unit normals are per panel.  ``grid_hash``
    identifies the discretization rule alone (ring count and disc radius,
    not the heights), which is what the inverse-crime guard compares.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    centroids: np.ndarray
    areas: np.ndarray
    normals: np.ndarray
    h: float
    n_rings: int
    support_radius: float
    content_hash: str
    grid_hash: str

    @property
    def n_panels(self) -> int:
        return self.triangles.shape[0]

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    def panel_vertices(self) -> np.ndarray:
        """(n_panels, 3, 3) array of the three corner points of each panel."""
        return self.vertices[self.triangles]


def _disc_grid(n: int):
    """Ring triangulation of the unit disc: center vertex plus rings of 6*i
    vertices; 6*n^2 triangles total, all oriented counterclockwise."""
    verts = [(0.0, 0.0)]
    for i in range(1, n + 1):
        cnt = 6 * i
        ang = 2.0 * np.pi * np.arange(cnt) / cnt
        r = i / n
        verts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
    verts = np.array(verts)

    def start(i):
        return 1 + 3 * i * (i - 1)

    tris = []
    for j in range(6):
        tris.append((0, start(1) + j, start(1) + (j + 1) % 6))
    for i in range(2, n + 1):
        no, ni = 6 * i, 6 * (i - 1)
        for s in range(6):
            outer = [start(i) + (s * i + t) % no for t in range(i + 1)]
            inner = [start(i - 1) + (s * (i - 1) + t) % ni for t in range(i)]
            for t in range(i):
                tris.append((outer[t], outer[t + 1], inner[t]))
            for t in range(i - 1):
                tris.append((inner[t], outer[t + 1], inner[t + 1]))
    return verts, np.array(tris, dtype=np.int64)


def mesh_perturbation(profile: SurfaceProfile, target_h: float) -> PanelMesh:
    """Triangulate the disc |x~| <= R with panels of size ~ target_h and lift
    the vertices onto the graph of the profile.  Rim vertices keep x3 = 0
    exactly; all normals point up into the propagation domain."""
    R = profile.support_radius
    if not (target_h > 0):
        raise ValueError(f"target_h must be > 0, got {target_h!r}")
    if target_h > R / 4:
        raise ValueError(f"target_h={target_h:g} too coarse; need target_h <= R/4 = {R / 4:g}")
    if profile.allow_dip:
        raise DippingProfileError(
            "profile was built with allow_dip; the image-kernel solver paths "
            "are invalid for dipping perturbations and refuse to mesh them"
        )
    n = math.ceil(R / target_h)
    verts2d, tris = _disc_grid(n)
    verts2d = verts2d * R
    z = profile.height(verts2d)
    z[1 + 3 * n * (n - 1):] = 0.0  # rim ring: exactly on the ground plane
    vertices = np.column_stack([verts2d, z])

    p = vertices[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    cross = np.cross(e1, e2)
    norms = np.linalg.norm(cross, axis=1)
    areas = 0.5 * norms
    normals = cross / norms[:, None]
    # CCW construction makes every normal point up already; flipping would
    # indicate an inverted panel, which the f>=0 validation excludes
    if np.any(normals[:, 2] <= 0):
        raise DippingProfileError("panel with non-upward normal; profile is not a valid graph")
    centroids = p.mean(axis=1)

    for arr in (vertices, tris, centroids, areas, normals):
        arr.setflags(write=False)
    return PanelMesh(
        vertices=vertices,
        triangles=tris,
        centroids=centroids,
        areas=areas,
        normals=normals,
        h=R / n,
        n_rings=n,
        support_radius=R,
        content_hash=_hash_arrays(vertices, tris, tag="mesh-v1"),
        grid_hash=_hash_arrays(np.array([float(n), R]), tag="rings-v1"),
    )


@dataclass(frozen=True)
class Plane:
    """Oriented plane given by a point on it and a unit normal."""

    point: np.ndarray
    normal: np.ndarray

    def __init__(self, point, normal):
        point = np.asarray(point, dtype=float).reshape(3)
        normal = np.asarray(normal, dtype=float).reshape(3)
        nrm = np.linalg.norm(normal)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise ValueError("plane normal must be nonzero and finite")
        normal = normal / nrm
        point.setflags(write=False)
        normal.setflags(write=False)
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "normal", normal)

    @classmethod
    def from_graph_coeffs(cls, A: float, B: float, C: float) -> "Plane":
        """Plane of the tilted facet x3 = A*x1 + B*x2 + C."""
        return cls(point=(0.0, 0.0, C), normal=(-A, -B, 1.0))


GROUND_PLANE = Plane(point=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0))


def mirror(x: np.ndarray, plane: Plane = GROUND_PLANE) -> np.ndarray:
    """Mirror image of x across the plane (involutive isometry).

    For the ground plane this is exactly (x1, x2, -x3)."""
    x = np.asarray(x, dtype=float)
    n = plane.normal
    dist = (x - plane.point) @ n
    return x - 2.0 * np.multiply.outer(dist, n)


def reflect_linear(v: np.ndarray, plane: Plane) -> np.ndarray:
    """Apply the linear part of the plane reflection (the map through the
    parallel plane containing the origin) to vectors v of shape (..., 3)."""
    v = np.asarray(v)
    n = plane.normal
    return v - 2.0 * np.multiply.outer(v @ n, n)


def export_mesh_csv(mesh: PanelMesh, path, scene_hash: str | None = None) -> None:
    """Panel table: panel_id, v1x..v3z, cx, cy, cz, area, nx, ny, nz."""
    cols = (
        ["panel_id"]
        + [f"v{i}{c}" for i in (1, 2, 3) for c in "xyz"]
        + ["cx", "cy", "cz", "area", "nx", "ny", "nz"]
    )
    pv = mesh.panel_vertices()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if scene_hash is not None:
            fh.write(f"# scene={scene_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(mesh.n_panels):
            row = [i]
            row += [f"{v:.17g}" for v in pv[i].ravel()]
            row += [f"{v:.17g}" for v in mesh.centroids[i]]
            row += [f"{mesh.areas[i]:.17g}"]
            row += [f"{v:.17g}" for v in mesh.normals[i]]
            writer.writerow(row)
