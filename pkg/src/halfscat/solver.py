"""Boundary-integral solver on the perturbed disc with half-space kernels.

Because the image kernels satisfy the ground-plane condition exactly, the
integral equation lives on the perturbed panels alone.  Sound-soft surfaces
use the combined double-minus-i*eta*single layer ansatz (eta = k), collocated
at panel centroids through the jump relation; sound-hard surfaces use a
single-layer ansatz with the even-image kernel and the normal-derivative
jump.  Far interactions use one-point centroid quadrature; self and adjacent
panels are integrated by three levels of geometric subdivision toward the
singular point.
"""

from __future__ import annotations

import csv
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ProximityError, ResonanceError, SolveError
from .geometry import PanelMesh
from .incident import (
    BoundaryCondition,
    IncidentWave,
    PlaneWave,
    PointSource,
    eval_pair,
    grad_pair,
)
from .kernels import GreenKernel, farfield_kernel, farfield_kernel_grad_y

_MIRROR = np.array([1.0, 1.0, -1.0])

SOLVE_RESIDUAL_RTOL = 1e-10
CONDITION_LIMIT = 1e8
GRADED_LEVELS = 3
_ROW_BLOCK = 256


@dataclass(frozen=True)
class LayerDensity:
    """Complex panel coefficients of the boundary ansatz."""

    coefficients: np.ndarray
    formulation: str  # dirichlet_combined | neumann_single
    eta: float
    k: float

    def __post_init__(self):
        coeff = np.asarray(self.coefficients, dtype=complex)
        if not np.all(np.isfinite(coeff)):
            raise ValueError("layer density has non-finite entries")
        coeff.setflags(write=False)
        object.__setattr__(self, "coefficients", coeff)

    @property
    def bc(self) -> BoundaryCondition:
        if self.formulation == "dirichlet_combined":
            return BoundaryCondition.DIRICHLET
        return BoundaryCondition.NEUMANN


@dataclass(frozen=True)
class SolveReport:
    panel_count: int
    condition_estimate: float
    residual_norm: float
    rhs_norm: float
    wall_time_s: float


@dataclass(frozen=True)
class DirectionGrid:
    """Upper-hemisphere observation directions, polar angle measured from +e3."""

    directions: np.ndarray  # (N, 3), all with positive third component
    theta: np.ndarray  # azimuth in [0, 2*pi)
    phi: np.ndarray  # polar angle in (0, pi/2)

    @classmethod
    def make(cls, n_theta: int, n_phi: int) -> "DirectionGrid":
        if n_theta < 1 or n_phi < 1:
            raise ValueError("direction grid needs n_theta >= 1 and n_phi >= 1")
        phis = (np.arange(n_phi) + 0.5) * (np.pi / 2) / n_phi
        thetas = np.arange(n_theta) * 2 * np.pi / n_theta
        tt, pp = np.meshgrid(thetas, phis, indexing="xy")
        tt = tt.ravel()
        pp = pp.ravel()
        dirs = np.column_stack(
            [np.sin(pp) * np.cos(tt), np.sin(pp) * np.sin(tt), np.cos(pp)]
        )
        for a in (dirs, tt, pp):
            a.setflags(write=False)
        return cls(directions=dirs, theta=tt, phi=pp)

    @classmethod
    def single(cls, direction) -> "DirectionGrid":
        d = np.asarray(direction, dtype=float).reshape(3)
        d = d / np.linalg.norm(d)
        if d[2] <= 0:
            raise ValueError("far-field directions must lie in the upper hemisphere")
        theta = np.array([np.arctan2(d[1], d[0]) % (2 * np.pi)])
        phi = np.array([np.arccos(np.clip(d[2], -1.0, 1.0))])
        return cls(directions=d[None, :], theta=theta, phi=phi)

    @property
    def size(self) -> int:
        return self.directions.shape[0]


@dataclass(frozen=True)
class FarFieldPattern:
    """Far-field samples of the scattered wave on the upper hemisphere."""

    grid: DirectionGrid
    values: np.ndarray
    k: float
    bc: BoundaryCondition
    mesh_h: float
    mesh_hash: str
    scene_hash: str = ""

    @property
    def directions(self) -> np.ndarray:
        return self.grid.directions


# ---------------------------------------------------------------------------
# pairwise kernels (unguarded, for assembly; r == 0 entries are overwritten)

def _pair_terms(dx: np.ndarray, k: float):
    """Phi and the radial factor c(r) with c*dx = grad_x Phi, for displacement
    arrays dx of shape (..., 3).  Zero-distance entries yield garbage that the
    caller must overwrite."""
    r = np.sqrt(np.sum(dx * dx, axis=-1))
    np.maximum(r, 1e-30, out=r)  # coincident pairs are overwritten by the caller
    phi = np.exp(1j * k * r) / (4.0 * np.pi * r)
    c = (1j * k - 1.0 / r) * phi / r
    return phi, c


def _entries_dirichlet(x, nu_x, y, nu_y, k, eta):
    """Combined-kernel collocation integrand [nu_y . grad_y G - i eta G]."""
    dx = x - y
    dxi = x - y * _MIRROR
    phi1, c1 = _pair_terms(dx, k)
    phi2, c2 = _pair_terms(dxi, k)
    # grad_y G = -grad_x Phi(x,y) + M grad_x Phi(x,y') for the odd kernel
    dl = -c1 * np.sum(dx * nu_y, axis=-1) + c2 * np.sum(dxi * (nu_y * _MIRROR), axis=-1)
    sl = phi1 - phi2
    return dl - 1j * eta * sl


def _entries_neumann(x, nu_x, y, nu_y, k, eta):
    """Adjoint-double-layer integrand nu_x . grad_x G_N for the even kernel."""
    dx = x - y
    dxi = x - y * _MIRROR
    _, c1 = _pair_terms(dx, k)
    _, c2 = _pair_terms(dxi, k)
    return c1 * np.sum(dx * nu_x, axis=-1) + c2 * np.sum(dxi * nu_x, axis=-1)


_ENTRY_FUNCS = {
    "dirichlet_combined": _entries_dirichlet,
    "neumann_single": _entries_neumann,
}


def _representation_dirichlet(x, y, nu_y, k, eta):
    """Potential integrand of the combined ansatz at off-surface points."""
    return _entries_dirichlet(x, None, y, nu_y, k, eta)


def _representation_neumann(x, y, nu_y, k, eta):
    dx = x - y
    dxi = x - y * _MIRROR
    phi1, _ = _pair_terms(dx, k)
    phi2, _ = _pair_terms(dxi, k)
    return phi1 + phi2


_REPR_FUNCS = {
    "dirichlet_combined": _representation_dirichlet,
    "neumann_single": _representation_neumann,
}


# ---------------------------------------------------------------------------
# graded quadrature toward the singular point

def _closest_points_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray):
    """Closest point of each triangle (a, b, c) to each p; vectorized version
    of Ericson's region classification, all inputs (N, 3)."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.sum(ab * ap, axis=-1)
    d2 = np.sum(ac * ap, axis=-1)
    bp = p - b
    d3 = np.sum(ab * bp, axis=-1)
    d4 = np.sum(ac * bp, axis=-1)
    cp = p - c
    d5 = np.sum(ab * cp, axis=-1)
    d6 = np.sum(ac * cp, axis=-1)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    def _safe_div(num, den):
        return num / np.where(den != 0.0, den, 1.0)

    with np.errstate(invalid="ignore", divide="ignore"):
        t_ab = _safe_div(d1, d1 - d3)[..., None]
        t_ac = _safe_div(d2, d2 - d6)[..., None]
        t_bc = _safe_div(d4 - d3, (d4 - d3) + (d5 - d6))[..., None]
        denom = _safe_div(np.ones_like(va), va + vb + vc)[..., None]
        interior = a + ab * (vb[..., None] * denom) + ac * (vc[..., None] * denom)

    out = interior
    m6 = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    out = np.where(m6[..., None], b + (c - b) * t_bc, out)
    m5 = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    out = np.where(m5[..., None], a + ac * t_ac, out)
    m4 = (d6 >= 0) & (d5 <= d6)
    out = np.where(m4[..., None], c, out)
    m3 = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    out = np.where(m3[..., None], a + ab * t_ab, out)
    m2 = (d3 >= 0) & (d4 <= d3)
    out = np.where(m2[..., None], b, out)
    m1 = (d1 <= 0) & (d2 <= 0)
    out = np.where(m1[..., None], a, out)
    return out


def _graded_leaves(verts: np.ndarray, p: np.ndarray, levels: int = GRADED_LEVELS):
    """Subdivide panels toward their singular points: connect p to the three
    corners, then refine each corner triangle geometrically toward p.

    verts: (N, 3, 3) panel corner points, p: (N, 3) singular points.
    Returns leaf centroids (N, L, 3) and areas (N, L); the leaves tile each
    panel exactly (degenerate corners, when p sits on an edge, simply carry
    zero area)."""
    cents = []
    areas = []

    def _push(t0, t1, t2):
        cents.append((t0 + t1 + t2) / 3.0)
        areas.append(0.5 * np.linalg.norm(np.cross(t1 - t0, t2 - t0), axis=-1))

    for ia, ib in ((0, 1), (1, 2), (2, 0)):
        a_prev = verts[:, ia]
        b_prev = verts[:, ib]
        for _ in range(levels):
            a_next = p + 0.5 * (a_prev - p)
            b_next = p + 0.5 * (b_prev - p)
            _push(a_prev, b_prev, b_next)
            _push(a_prev, b_next, a_next)
            a_prev, b_prev = a_next, b_next
        _push(p, a_prev, b_prev)
    return np.stack(cents, axis=1), np.stack(areas, axis=1)


def _vertex_adjacency(mesh: PanelMesh):
    """Pairs (i, j) of panels sharing at least one vertex, i collocating on j."""
    v2p: dict[int, list[int]] = {}
    tris = mesh.triangles
    for t in range(tris.shape[0]):
        for v in tris[t]:
            v2p.setdefault(int(v), []).append(t)
    pairs = set()
    for t in range(tris.shape[0]):
        near = set()
        for v in tris[t]:
            near.update(v2p[int(v)])
        for u in near:
            pairs.add((t, u))
    return sorted(pairs)


# ---------------------------------------------------------------------------
# assembly, factorization cache, solves

@dataclass
class _Factorization:
    matrix: np.ndarray
    lu: np.ndarray
    piv: np.ndarray
    cond_estimate: float
    eta: float
    formulation: str
    assembly_time_s: float


_CACHE_LOCK = threading.Lock()
_FACTOR_CACHE: OrderedDict[tuple, _Factorization] = OrderedDict()
_FACTOR_CACHE_SIZE = 6


def clear_factorization_cache() -> None:
    with _CACHE_LOCK:
        _FACTOR_CACHE.clear()


def _formulation_for(bc: BoundaryCondition) -> str:
    return "dirichlet_combined" if bc is BoundaryCondition.DIRICHLET else "neumann_single"


def _assemble_matrix(mesh: PanelMesh, k: float, bc: BoundaryCondition, eta: float) -> np.ndarray:
    n = mesh.n_panels
    cents = mesh.centroids
    normals = mesh.normals
    areas = mesh.areas
    entry = _ENTRY_FUNCS[_formulation_for(bc)]

    A = np.empty((n, n), dtype=complex)
    for lo in range(0, n, _ROW_BLOCK):
        hi = min(lo + _ROW_BLOCK, n)
        x = cents[lo:hi, None, :]
        nu_x = normals[lo:hi, None, :]
        A[lo:hi] = entry(x, nu_x, cents[None, :, :], normals[None, :, :], k, eta) * areas

    # self and vertex-adjacent panels: graded subdivision toward the point of
    # the source panel closest to the collocation point
    pairs = _vertex_adjacency(mesh)
    rows = np.array([i for i, _ in pairs])
    cols = np.array([j for _, j in pairs])
    pv = mesh.panel_vertices()[cols]
    p_sing = _closest_points_on_triangles(cents[rows], pv[:, 0], pv[:, 1], pv[:, 2])
    leaf_cents, leaf_areas = _graded_leaves(pv, p_sing)
    vals = entry(
        cents[rows][:, None, :],
        normals[rows][:, None, :],
        leaf_cents,
        normals[cols][:, None, :],
        k,
        eta,
    )
    A[rows, cols] = np.sum(vals * leaf_areas, axis=1)

    jump = 0.5 if bc is BoundaryCondition.DIRICHLET else -0.5
    A[np.arange(n), np.arange(n)] += jump
    return A


def _condition_estimate(A: np.ndarray, lu: np.ndarray) -> float:
    try:
        gecon = scipy.linalg.get_lapack_funcs("gecon", (A,))
        anorm = np.linalg.norm(A, 1)
        rcond, info = gecon(lu, anorm, norm="1")
        if info == 0 and rcond > 0:
            return float(1.0 / rcond)
    except Exception:
        pass
    return float(np.linalg.cond(A, 1))


def get_factorization(mesh: PanelMesh, k: float, bc: BoundaryCondition) -> _Factorization:
    """Assemble and factorize (or fetch from the cache) the collocation system
    for this mesh/wavenumber/boundary condition."""
    eta = k if bc is BoundaryCondition.DIRICHLET else 0.0
    key = (mesh.content_hash, float(k), bc.value)
    with _CACHE_LOCK:
        fact = _FACTOR_CACHE.get(key)
        if fact is not None:
            _FACTOR_CACHE.move_to_end(key)
            return fact

    t0 = time.perf_counter()
    A = _assemble_matrix(mesh, k, bc, eta)
    lu, piv = scipy.linalg.lu_factor(A)
    cond = _condition_estimate(A, lu)
    fact = _Factorization(
        matrix=A,
        lu=lu,
        piv=piv,
        cond_estimate=cond,
        eta=eta,
        formulation=_formulation_for(bc),
        assembly_time_s=time.perf_counter() - t0,
    )
    if cond > CONDITION_LIMIT:
        if bc is BoundaryCondition.NEUMANN:
            raise ResonanceError(
                f"condition estimate {cond:.2e} exceeds {CONDITION_LIMIT:.0e}: the "
                "single-layer sound-hard formulation is near a spurious interior "
                "resonance of the perturbation; move the wavenumber"
            )
        raise ResonanceError(
            f"condition estimate {cond:.2e} exceeds {CONDITION_LIMIT:.0e} for the "
            "combined-field system"
        )
    with _CACHE_LOCK:
        _FACTOR_CACHE[key] = fact
        _FACTOR_CACHE.move_to_end(key)
        while len(_FACTOR_CACHE) > _FACTOR_CACHE_SIZE:
            _FACTOR_CACHE.popitem(last=False)
    return fact


def _right_hand_side(mesh: PanelMesh, inc: IncidentWave) -> np.ndarray:
    if inc.bc is BoundaryCondition.DIRICHLET:
        return -eval_pair(inc, mesh.centroids)
    return -np.sum(grad_pair(inc, mesh.centroids) * mesh.normals, axis=-1)


def solve_scattered(mesh: PanelMesh, inc: IncidentWave) -> tuple[LayerDensity, SolveReport]:
    """Solve the collocation system for the scattered-field density.

    Point sources must keep a 2h standoff from the surface panels.  The
    factorization is cached per (mesh, k, bc), so repeated solves on one
    scene only pay for the right-hand side and the triangular solves.
    """
    if isinstance(inc, PointSource):
        dist = np.min(np.linalg.norm(mesh.centroids - inc.z, axis=1))
        if dist < 2.0 * mesh.h:
            raise ProximityError(
                f"point source at distance {dist:.3g} from the surface; "
                f"need at least 2h = {2 * mesh.h:.3g}"
            )
    t0 = time.perf_counter()
    fact = get_factorization(mesh, inc.k, inc.bc)
    b = _right_hand_side(mesh, inc)
    sigma = scipy.linalg.lu_solve((fact.lu, fact.piv), b)
    rhs_norm = float(np.linalg.norm(b))
    residual = float(np.linalg.norm(fact.matrix @ sigma - b))
    if rhs_norm > 0 and residual > SOLVE_RESIDUAL_RTOL * rhs_norm:
        raise SolveError(
            f"linear solve residual {residual:.3e} exceeds "
            f"{SOLVE_RESIDUAL_RTOL:g} * ||rhs|| = {SOLVE_RESIDUAL_RTOL * rhs_norm:.3e}"
        )
    density = LayerDensity(
        coefficients=sigma,
        formulation=fact.formulation,
        eta=fact.eta,
        k=inc.k,
    )
    report = SolveReport(
        panel_count=mesh.n_panels,
        condition_estimate=fact.cond_estimate,
        residual_norm=residual,
        rhs_norm=rhs_norm,
        wall_time_s=time.perf_counter() - t0,
    )
    return density, report


def _check_density_matches(density: LayerDensity, mesh: PanelMesh) -> None:
    if density.coefficients.shape[0] != mesh.n_panels:
        raise ValueError(
            f"density carries {density.coefficients.shape[0]} coefficients "
            f"but the mesh has {mesh.n_panels} panels"
        )


def _check_eval_distance(mesh: PanelMesh, pts: np.ndarray) -> None:
    d_direct = np.linalg.norm(pts[:, None, :] - mesh.centroids[None, :, :], axis=-1)
    d_image = np.linalg.norm(pts[:, None, :] - (mesh.centroids * _MIRROR)[None, :, :], axis=-1)
    dist = min(d_direct.min(), d_image.min())
    if dist < 2.0 * mesh.h:
        raise ProximityError(
            f"evaluation point at distance {dist:.3g} from the surface or its "
            f"image; the one-point representation quadrature needs 2h = {2 * mesh.h:.3g}"
        )


def eval_scattered(
    density: LayerDensity, mesh: PanelMesh, inc: IncidentWave, x: np.ndarray
) -> np.ndarray:
    """Evaluate the layer-potential representation at points x (off-surface).

    The kernel is defined on both sides of the ground plane, so mirrored
    evaluation points are legitimate; they are what the extension checks use.
    """
    if inc is not None:
        if inc.k != density.k or _formulation_for(inc.bc) != density.formulation:
            raise ValueError("incident wave does not match the density's k or formulation")
    _check_density_matches(density, mesh)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(-1, 3)
    _check_eval_distance(mesh, pts)
    rep = _REPR_FUNCS[density.formulation]
    vals = rep(pts[:, None, :], mesh.centroids[None, :, :], mesh.normals[None, :, :],
               density.k, density.eta)
    out = (vals * mesh.areas) @ density.coefficients
    return out[0] if single else out


def eval_farfield(
    density: LayerDensity,
    mesh: PanelMesh,
    grid: DirectionGrid,
    scene_hash: str = "",
) -> FarFieldPattern:
    """Far-field pattern of the representation on a hemisphere grid."""
    _check_density_matches(density, mesh)
    kern = GreenKernel(k=density.k, bc=density.bc)
    dirs = grid.directions[:, None, :]
    y = mesh.centroids[None, :, :]
    if density.formulation == "dirichlet_combined":
        ff = np.sum(farfield_kernel_grad_y(kern, dirs, y) * mesh.normals[None, :, :], axis=-1)
        ff = ff - 1j * density.eta * farfield_kernel(kern, dirs, y)
    else:
        ff = farfield_kernel(kern, dirs, y)
    values = (ff * mesh.areas) @ density.coefficients
    values.setflags(write=False)
    return FarFieldPattern(
        grid=grid,
        values=values,
        k=density.k,
        bc=density.bc,
        mesh_h=mesh.h,
        mesh_hash=mesh.content_hash,
        scene_hash=scene_hash,
    )


def export_farfield_csv(pattern: FarFieldPattern, path) -> None:
    """CSV with a provenance header line, then theta, phi, re, im rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(
            f"# k={pattern.k:.17g} bc={pattern.bc.value} mesh_h={pattern.mesh_h:.17g} "
            f"scene={pattern.scene_hash}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(["theta", "phi", "re", "im"])
        for t, p, v in zip(pattern.grid.theta, pattern.grid.phi, pattern.values):
            writer.writerow([f"{t:.17g}", f"{p:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def export_density_csv(density: LayerDensity, path, scene_hash: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if scene_hash is not None:
            fh.write(f"# scene={scene_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["panel_id", "re", "im"])
        for i, c in enumerate(density.coefficients):
            writer.writerow([i, f"{c.real:.17g}", f"{c.imag:.17g}"])
