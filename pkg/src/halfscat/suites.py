"""Check-suite runners behind the command-line verbs.

Every suite is deterministic for a fixed scene hash: sample points come from
the scene seed, solves share cached factorizations, and results are collected
in a fixed order regardless of the worker-thread count.  Tolerances live in
one table; a scale factor loosens every bound coherently (upper bounds and
window half-widths multiply, lower-bound ratios divide).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SceneConfigError
from .geometry import GROUND_PLANE, mesh_perturbation
from .identities import (
    IdentityReport,
    SlopeReport,
    check_extension,
    check_kernel_radiation_decay,
    check_mixed_reciprocity,
    check_point_symmetry,
    check_radiation_decay,
    check_reflected_farfield,
)
from .incident import BoundaryCondition
from .inverse import (
    InversionConfig,
    ProfileParams,
    blow_up_indicator,
    forward_map,
    invert_profile,
)
from .maxwell import (
    DipoleSource,
    check_reflection_principle,
    check_silver_muller,
    eval_dipole,
    eval_image_field,
    fd_divergence,
    maxwell_fd_residuals,
    pec_residual,
)
from .solver import get_factorization, solve_scattered, eval_farfield
from .util import parallel_map


@dataclass(frozen=True)
class SuiteTolerances:
    mixed_reciprocity: float = 2e-2
    point_symmetry: float = 2e-2
    reflected_farfield: float = 1e-12
    extension: float = 1e-12
    decay_slope_center: float = -2.0
    decay_slope_halfwidth: float = 0.2
    pec: float = 1e-12
    reflection: float = 1e-12
    maxwell_fd: float = 1e-5
    sm_slope_margin: float = 0.2  # residual slope <= -1 + margin
    sm_E_halfwidth: float = 0.2  # |E| slope within -1 +/- halfwidth
    indicator_ratio: float = 10.0  # lower bound, divided by the scale factor
    offline_ratio: float = 2.0
    invert_param_rel: float = 0.05
    convergence: float = 5e-2
    flat_null: float = 1e-12

    def scaled(self, factor: float) -> "SuiteTolerances":
        if factor == 1.0:
            return self
        return replace(
            self,
            mixed_reciprocity=self.mixed_reciprocity * factor,
            point_symmetry=self.point_symmetry * factor,
            reflected_farfield=self.reflected_farfield * factor,
            extension=self.extension * factor,
            decay_slope_halfwidth=self.decay_slope_halfwidth * factor,
            pec=self.pec * factor,
            reflection=self.reflection * factor,
            maxwell_fd=self.maxwell_fd * factor,
            sm_slope_margin=self.sm_slope_margin * factor,
            sm_E_halfwidth=self.sm_E_halfwidth * factor,
            indicator_ratio=self.indicator_ratio / factor,
            offline_ratio=self.offline_ratio * factor,
            invert_param_rel=self.invert_param_rel * factor,
            convergence=self.convergence * factor,
            flat_null=self.flat_null * factor,
        )


DEFAULT_TOLERANCES = SuiteTolerances()


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    requirement: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "value", float(self.value))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.6g} ({self.requirement})"


@dataclass(frozen=True)
class _SceneView:
    """Scene duck with a replaced mesh (used for the refined-mesh checks)."""

    profile: object
    mesh: object
    k: float
    bc: BoundaryCondition
    metadata: dict


def refine_scene(scene, factor: float = 0.5):
    target = scene.config.mesh["target_h"] * factor
    mesh = mesh_perturbation(scene.profile, target)
    meta = dict(scene.metadata)
    meta["mesh_h"] = mesh.h
    meta["mesh_hash"] = mesh.content_hash
    return _SceneView(profile=scene.profile, mesh=mesh, k=scene.k, bc=scene.bc, metadata=meta)


# ---------------------------------------------------------------------------
# deterministic sample generators

def mixed_reciprocity_pairs(scene, n_extra: int = 2):
    """Canonical (d, z) pair plus seeded random ones, all with z well above
    the perturbation."""
    pairs = [(np.array([0.0, 0.0, -1.0]), np.array([0.5, 0.0, 1.5]))]
    rng = np.random.default_rng(scene.seed + 101)
    for _ in range(n_extra):
        phi = rng.uniform(-1.0, 1.0)
        theta = rng.uniform(0.0, 2 * np.pi)
        d = np.array(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), -np.cos(phi)]
        )
        ang = rng.uniform(0, 2 * np.pi)
        rad = rng.uniform(0.0, 1.0)
        z = np.array([rad * np.cos(ang), rad * np.sin(ang), rng.uniform(1.2, 1.9)])
        pairs.append((d, z))
    return pairs


def symmetry_pairs(scene, n_random: int = 3):
    """Two pinned pairs (one with both points low over the rim, echoing the
    mirrored-region case layout) plus seeded random pairs."""
    pairs = [
        (np.array([0.6, 0.0, 1.2]), np.array([-0.4, 0.3, 1.8])),
        (np.array([1.35, 0.0, 0.25]), np.array([-1.4, 0.2, 0.25])),
    ]
    rng = np.random.default_rng(scene.seed + 202)
    for _ in range(n_random):
        pts = []
        for _ in range(2):
            ang = rng.uniform(0, 2 * np.pi)
            rad = rng.uniform(0.0, 1.2)
            pts.append(np.array([rad * np.cos(ang), rad * np.sin(ang), rng.uniform(1.0, 2.0)]))
        pairs.append(tuple(pts))
    return pairs[: 2 + n_random]


def reflected_farfield_triples(seed: int, n: int = 100):
    rng = np.random.default_rng(seed + 303)
    triples = []
    for i in range(n):
        ang = rng.uniform(0, 2 * np.pi)
        rad = rng.uniform(0.0, 2.0)
        z3 = 0.0 if i == 0 else rng.uniform(0.0, 2.0)  # include the on-plane case
        z = np.array([rad * np.cos(ang), rad * np.sin(ang), z3])
        phi = rng.uniform(-1.4, 1.4)
        theta = rng.uniform(0.0, 2 * np.pi)
        d = np.array(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), -np.cos(phi)]
        )
        k = rng.uniform(0.5, 5.0)
        triples.append((z, d, k))
    return triples


def extension_samples(scene, n: int = 50):
    """Exterior shell samples with |x| in (1.5R, 3R), upper half space."""
    R = scene.mesh.support_radius
    rng = np.random.default_rng(scene.seed + 404)
    dirs = rng.normal(size=(n, 3))
    dirs[:, 2] = np.abs(dirs[:, 2]) + 0.05
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(1.5 * R, 3.0 * R, size=n)
    return dirs * radii[:, None]


# ---------------------------------------------------------------------------
# suites

def run_identities(scene, tol: SuiteTolerances = DEFAULT_TOLERANCES, threads: int = 1,
                   with_refinement: bool = True):
    """Full identity suite on one scene; returns CheckResults plus the raw
    reports (identity JSON-line records and slope reports)."""
    get_factorization(scene.mesh, scene.k, scene.bc)  # warm the shared solve
    results: list[CheckResult] = []
    reports: list[IdentityReport | SlopeReport] = []

    pairs = mixed_reciprocity_pairs(scene)
    mixed = parallel_map(lambda dz: check_mixed_reciprocity(scene, dz[0], dz[1]), pairs, threads)
    for i, rep in enumerate(mixed):
        reports.append(rep)
        results.append(
            CheckResult(
                name=f"mixed_reciprocity[{i}]",
                passed=rep.rel_err <= tol.mixed_reciprocity,
                value=rep.rel_err,
                requirement=f"rel_err <= {tol.mixed_reciprocity:g}",
            )
        )

    if with_refinement:
        fine = refine_scene(scene)
        get_factorization(fine.mesh, fine.k, fine.bc)
        d0, z0 = pairs[0]
        rep_f = check_mixed_reciprocity(fine, d0, z0)
        reports.append(rep_f)
        results.append(
            CheckResult(
                name="mixed_reciprocity_monotone",
                passed=rep_f.rel_err <= mixed[0].rel_err,
                value=rep_f.rel_err,
                requirement=f"rel_err(h/2) <= rel_err(h) = {mixed[0].rel_err:.3e}",
            )
        )

    sym = parallel_map(
        lambda xy: check_point_symmetry(scene, xy[0], xy[1]), symmetry_pairs(scene), threads
    )
    for i, rep in enumerate(sym):
        reports.append(rep)
        results.append(
            CheckResult(
                name=f"point_symmetry[{i}]",
                passed=rep.rel_err <= tol.point_symmetry,
                value=rep.rel_err,
                requirement=f"rel_err <= {tol.point_symmetry:g}",
            )
        )

    worst = 0.0
    for bc in (BoundaryCondition.DIRICHLET, BoundaryCondition.NEUMANN):
        for z, d, k in reflected_farfield_triples(scene.seed):
            rep = check_reflected_farfield(z, d, k, bc, scene.metadata)
            worst = max(worst, rep.rel_err)
    reports.append(
        IdentityReport(
            name="reflected_farfield_worst",
            lhs=0.0,
            rhs=0.0,
            abs_err=worst,
            rel_err=worst,
            scene=scene.metadata,
        )
    )
    results.append(
        CheckResult(
            name="reflected_farfield",
            passed=worst <= tol.reflected_farfield,
            value=worst,
            requirement=f"rel_err <= {tol.reflected_farfield:g} on 100 triples, both bcs",
        )
    )

    inc = scene.incidents[0]
    density, _ = solve_scattered(scene.mesh, inc)
    ext = check_extension(density, scene.mesh, scene.bc, extension_samples(scene), scene.metadata)
    reports.append(ext)
    results.append(
        CheckResult(
            name="extension",
            passed=ext.abs_err <= tol.extension,
            value=ext.abs_err,
            requirement=f"max mirrored residual <= {tol.extension:g}",
        )
    )

    lo = tol.decay_slope_center - tol.decay_slope_halfwidth
    hi = tol.decay_slope_center + tol.decay_slope_halfwidth
    decay = check_radiation_decay(density, scene.mesh, inc, np.array([0.0, 0.0, 1.0]),
                                  scene_meta=scene.metadata)
    reports.append(decay)
    results.append(
        CheckResult(
            name="radiation_decay",
            passed=decay.vacuous or (lo <= decay.slope <= hi),
            value=decay.slope,
            requirement=f"slope in [{lo:g}, {hi:g}]",
        )
    )
    kern_decay = check_kernel_radiation_decay(
        scene.k, scene.bc, np.array([0.3, -0.2, 0.5]), np.array([0.0, 0.0, 1.0])
    )
    reports.append(kern_decay)
    results.append(
        CheckResult(
            name="kernel_radiation_decay",
            passed=lo <= kern_decay.slope <= hi,
            value=kern_decay.slope,
            requirement=f"slope in [{lo:g}, {hi:g}]",
        )
    )
    return results, reports


def run_maxwell(k: float, dipole_y, dipole_p, seed: int = 0,
                tol: SuiteTolerances = DEFAULT_TOLERANCES):
    """Electromagnetic image-field suite: PEC condition, reflection principle,
    finite-difference Maxwell and divergence residuals, Silver-Mueller decay."""
    src = DipoleSource(y=dipole_y, p=dipole_p, k=k)
    rng = np.random.default_rng(seed + 505)
    results: list[CheckResult] = []

    ang = rng.uniform(0, 2 * np.pi, size=200)
    rad = 3.0 * np.sqrt(rng.uniform(0, 1, size=200))
    plane_pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang), np.zeros(200)])
    pec = pec_residual(src, GROUND_PLANE, plane_pts)
    results.append(
        CheckResult(
            name="pec_tangential",
            passed=pec <= tol.pec,
            value=pec,
            requirement=f"relative tangential residual <= {tol.pec:g} at 200 plane samples",
        )
    )

    box = rng.normal(size=(100, 3))
    box[:, 2] = np.abs(box[:, 2]) + 0.2
    keep = np.linalg.norm(box - src.y, axis=1) > 0.2
    keep &= np.linalg.norm(box - src.y * np.array([1, 1, -1]), axis=1) > 0.2
    rep = check_reflection_principle(src, GROUND_PLANE, box[keep])
    res_rel = max(rep.max_E_residual, rep.max_H_residual) / rep.field_scale
    results.append(
        CheckResult(
            name="reflection_principle",
            passed=res_rel <= tol.reflection,
            value=res_rel,
            requirement=f"E and H reflection residuals <= {tol.reflection:g} relative",
        )
    )

    worst_fd = 0.0
    worst_div = 0.0
    for _ in range(20):
        x = rng.normal(size=3) * 1.5
        x[2] = abs(x[2]) + 0.3
        if np.linalg.norm(x - src.y) < 0.3:
            continue

        def E_tot(q, s=src):
            return eval_dipole(s, q).E + eval_image_field(s, GROUND_PLANE, q).E

        def H_tot(q, s=src):
            return eval_dipole(s, q).H + eval_image_field(s, GROUND_PLANE, q).H

        r1, r2 = maxwell_fd_residuals(E_tot, H_tot, x, src.k)
        worst_fd = max(worst_fd, r1, r2)
        scale = src.k * max(np.linalg.norm(E_tot(x)), np.linalg.norm(H_tot(x)))
        worst_div = max(
            worst_div,
            abs(fd_divergence(E_tot, x, src.k)) / scale,
            abs(fd_divergence(H_tot, x, src.k)) / scale,
        )
    results.append(
        CheckResult(
            name="maxwell_fd_residual",
            passed=worst_fd <= tol.maxwell_fd,
            value=worst_fd,
            requirement=f"curl-system FD residual <= {tol.maxwell_fd:g}",
        )
    )
    results.append(
        CheckResult(
            name="divergence_fd_residual",
            passed=worst_div <= tol.maxwell_fd,
            value=worst_div,
            requirement=f"divergence FD residual <= {tol.maxwell_fd:g}",
        )
    )

    sm = check_silver_muller(src, GROUND_PLANE, np.array([0.0, 0.0, 1.0]))
    bound = -1.0 + tol.sm_slope_margin
    results.append(
        CheckResult(
            name="silver_muller_slope",
            passed=sm.slope_residual <= bound,
            value=sm.slope_residual,
            requirement=f"|H x x - r E| log-log slope <= {bound:g}",
        )
    )
    return results


def run_indicator(scene, tol: SuiteTolerances = DEFAULT_TOLERANCES, threads: int = 1):
    """Blow-up indicator on a descending line over the apex and a reference
    line far from the perturbation."""
    n = scene.config.indicator["n_samples"]
    top = scene.config.indicator["top"]
    far = scene.config.indicator["far_factor"] * scene.mesh.support_radius
    apex = scene.profile.peak_height
    bottom = apex + 3.0 * scene.mesh.h
    z3 = np.linspace(top, bottom, n)

    descend = np.column_stack([np.zeros(n), np.zeros(n), z3])
    offline = np.column_stack([np.full(n, far), np.zeros(n), z3])
    ind_d, ind_o = parallel_map(
        lambda pts: blow_up_indicator(scene, pts), [descend, offline], threads
    )

    results = []
    tail = ind_d.values[-5:]
    monotone = bool(np.all(np.diff(tail) > 0))
    results.append(
        CheckResult(
            name="indicator_monotone",
            passed=monotone,
            value=float(np.min(np.diff(tail))),
            requirement="I strictly increasing over the last 5 descent samples",
        )
    )
    ratio = float(ind_d.values[-1] / ind_d.values[0])
    results.append(
        CheckResult(
            name="indicator_blowup_ratio",
            passed=ratio >= tol.indicator_ratio,
            value=ratio,
            requirement=f"I(closest)/I(farthest) >= {tol.indicator_ratio:g}",
        )
    )
    off_ratio = float(ind_o.values[-1] / ind_o.values[0])
    results.append(
        CheckResult(
            name="indicator_off_perturbation",
            passed=off_ratio <= tol.offline_ratio,
            value=off_ratio,
            requirement=f"off-perturbation ratio <= {tol.offline_ratio:g}",
        )
    )
    return results, ind_d, ind_o


def synthesize_invert_data(scene):
    """Noisy synthetic far-field data for the inversion experiment, generated
    from the scene profile on the configured data mesh (which must differ from
    the inversion discretization)."""
    if scene.profile.kind != "gaussian_bump":
        raise SceneConfigError("profile.kind", "invert experiment needs a gaussian_bump scene")
    cfg = scene.config.invert
    truth = ProfileParams.bump(
        scene.profile.amplitude, scene.profile.width, scene.profile.support_radius
    )
    incidents = scene.incidents
    clean = forward_map(truth, list(incidents), scene.grid, cfg["data_target_h"])
    rng = np.random.default_rng(scene.seed + 606)
    noise_rms = cfg["noise_level"] * np.sqrt(np.mean(np.abs(clean) ** 2))
    noise = noise_rms * (
        rng.standard_normal(clean.size) + 1j * rng.standard_normal(clean.size)
    ) / np.sqrt(2.0)
    data_mesh = mesh_perturbation(truth.to_profile(), cfg["data_target_h"])
    return truth, clean + noise, data_mesh.grid_hash


def run_invert(scene, tol: SuiteTolerances = DEFAULT_TOLERANCES):
    """Recover the bump parameters from the synthetic data; passes when every
    parameter lands within the relative tolerance of the truth."""
    cfg = scene.config.invert
    truth, data, data_grid_hash = synthesize_invert_data(scene)
    init = ProfileParams.bump(cfg["init"][0], cfg["init"][1], scene.profile.support_radius)
    inv_cfg = InversionConfig(
        regularization=cfg["regularization"],
        max_iterations=cfg["max_iterations"],
        fd_step=cfg["fd_step"],
        noise_level=cfg["noise_level"],
        target_h=scene.config.mesh["target_h"],
        data_grid_hash=data_grid_hash,
    )
    recovered, report = invert_profile(data, list(scene.incidents), scene.grid, inv_cfg, init)
    rel = np.abs(recovered.values - truth.values) / np.abs(truth.values)
    results = [
        CheckResult(
            name="invert_parameter_error",
            passed=bool(np.max(rel) <= tol.invert_param_rel),
            value=float(np.max(rel)),
            requirement=f"per-parameter relative error <= {tol.invert_param_rel:g}",
            payload={
                "recovered": recovered.values.tolist(),
                "truth": truth.values.tolist(),
                "iterations": report.iterations,
            },
        )
    ]
    return results, recovered, report


def run_convergence(scene, tol: SuiteTolerances = DEFAULT_TOLERANCES):
    """Far-field max-norm self-convergence between h and h/2."""
    inc = scene.incidents[0]
    coarse, _ = solve_scattered(scene.mesh, inc)
    f_coarse = eval_farfield(coarse, scene.mesh, scene.grid, scene.scene_hash).values
    fine_scene = refine_scene(scene)
    fine, _ = solve_scattered(fine_scene.mesh, inc)
    f_fine = eval_farfield(fine, fine_scene.mesh, scene.grid, scene.scene_hash).values
    gap = float(np.max(np.abs(f_coarse - f_fine)))
    denom = float(np.max(np.abs(f_fine)))
    rel = gap / denom if denom > 0 else (0.0 if gap == 0 else np.inf)
    return [
        CheckResult(
            name="farfield_self_convergence",
            passed=rel <= tol.convergence,
            value=rel,
            requirement=f"max-norm relative difference h vs h/2 <= {tol.convergence:g}",
        )
    ]
