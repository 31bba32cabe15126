"""Configuration-driven command line: solves, check suites, artifacts.

Subcommands: forward, identities, maxwell, indicator, invert, convergence.
Exit status is 0 only when every tolerance of the requested suite is met;
validation problems exit with status 2 and a field-level message.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .errors import SceneConfigError
from .geometry import export_mesh_csv
from .inverse import export_indicator_csv, export_inversion_trace_csv
from .scene import build_scene, load_config
from .solver import eval_farfield, export_density_csv, export_farfield_csv, solve_scattered
from .suites import (
    DEFAULT_TOLERANCES,
    run_convergence,
    run_identities,
    run_indicator,
    run_invert,
    run_maxwell,
)

OUT_DIR_ENV = "HALFSCAT_OUT"
SUBCOMMANDS = ("forward", "identities", "maxwell", "indicator", "invert", "convergence")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halfscat",
        description="Scattering solves and identity-check suites for a locally "
        "perturbed ground plane.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_text in (
        ("forward", "solve the scene and export far-field/density/mesh tables"),
        ("identities", "run the full identity suite (reciprocity, symmetry, extension, decay)"),
        ("maxwell", "run the electromagnetic image-field checks"),
        ("indicator", "map the point-source blow-up indicator along probe lines"),
        ("invert", "recover bump parameters from synthetic far-field data"),
        ("convergence", "compare far fields between mesh sizes h and h/2"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scene config file (YAML)")
        p.add_argument("--out", default=None, help=f"output directory (default ${OUT_DIR_ENV})")
        p.add_argument("--threads", type=int, default=1, help="worker-thread cap (default 1)")
        p.add_argument("--dry-run", action="store_true", help="validate and print the plan only")
        p.add_argument(
            "--tolerance-scale",
            type=float,
            default=1.0,
            help="multiply all suite tolerances (default 1)",
        )
    return parser


def _resolve_out_dir(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path("halfscat_out")


def _print_results(results) -> bool:
    ok = True
    for res in results:
        print(res.line())
        ok &= res.passed
    return ok


def _write_jsonl(path: Path, lines) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    if not (args.tolerance_scale > 0):
        print("error: --tolerance-scale must be > 0", file=sys.stderr)
        return 2

    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    except SceneConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2

    out_dir = _resolve_out_dir(args, cfg)
    tol = DEFAULT_TOLERANCES.scaled(args.tolerance_scale)

    try:
        scene = build_scene(cfg)
    except (SceneConfigError, ValueError) as exc:
        print(f"error: invalid scene: {exc}", file=sys.stderr)
        return 2

    if args.dry_run:
        plan = {
            "subcommand": args.subcommand,
            "config": str(args.config),
            "scene_hash": scene.scene_hash,
            "k": scene.k,
            "bc": scene.bc.value,
            "mesh_panels": scene.mesh.n_panels,
            "mesh_h": scene.mesh.h,
            "incidents": len(scene.incidents),
            "farfield_directions": scene.grid.size,
            "threads": args.threads,
            "tolerance_scale": args.tolerance_scale,
            "out_dir": str(out_dir),
        }
        print("dry run; execution plan:")
        for key, val in plan.items():
            print(f"  {key}: {val}")
        return 0

    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        ok = _dispatch(args.subcommand, scene, tol, args.threads, out_dir)
    except SceneConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"scene {scene.scene_hash}: {'all checks passed' if ok else 'TOLERANCE BREACH'} "
          f"({time.perf_counter() - t0:.1f}s)")
    return 0 if ok else 1


def _dispatch(subcommand: str, scene, tol, threads: int, out_dir: Path) -> bool:
    if subcommand == "forward":
        return _run_forward(scene, out_dir)
    if subcommand == "identities":
        results, reports = run_identities(scene, tol, threads)
        _write_jsonl(out_dir / "identities.jsonl", [r.to_json_line() for r in reports])
        return _print_results(results)
    if subcommand == "maxwell":
        results = run_maxwell(
            scene.k,
            scene.config.maxwell["y"],
            scene.config.maxwell["p"],
            seed=scene.seed,
            tol=tol,
        )
        _write_jsonl(
            out_dir / "maxwell.jsonl",
            [
                json.dumps(
                    {
                        "name": r.name,
                        "value": r.value,
                        "passed": r.passed,
                        "scene_hash": scene.scene_hash,
                    }
                )
                for r in results
            ],
        )
        return _print_results(results)
    if subcommand == "indicator":
        results, descend, offline = run_indicator(scene, tol, threads)
        export_indicator_csv(descend, out_dir / "indicator_descend.csv",
                             scene_hash=scene.scene_hash)
        export_indicator_csv(offline, out_dir / "indicator_offline.csv",
                             scene_hash=scene.scene_hash)
        return _print_results(results)
    if subcommand == "invert":
        results, recovered, report = run_invert(scene, tol)
        export_inversion_trace_csv(report, out_dir / "inversion_trace.csv",
                                   scene_hash=scene.scene_hash)
        with open(out_dir / "inversion_result.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "scene_hash": scene.scene_hash,
                    "recovered": recovered.values.tolist(),
                    "iterations": report.iterations,
                    "stop_reason": report.stop_reason,
                    "regularization": report.regularization,
                },
                fh,
                indent=2,
            )
        return _print_results(results)
    if subcommand == "convergence":
        results = run_convergence(scene, tol)
        with open(out_dir / "convergence.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "scene_hash": scene.scene_hash,
                    "value": results[0].value,
                    "passed": results[0].passed,
                },
                fh,
                indent=2,
            )
        return _print_results(results)
    raise ValueError(f"unknown subcommand {subcommand!r}")


def _run_forward(scene, out_dir: Path) -> bool:
    export_mesh_csv(scene.mesh, out_dir / "mesh.csv", scene_hash=scene.scene_hash)
    report_payload = []
    for i, inc in enumerate(scene.incidents):
        density, report = solve_scattered(scene.mesh, inc)
        pattern = eval_farfield(density, scene.mesh, scene.grid, scene.scene_hash)
        export_farfield_csv(pattern, out_dir / f"farfield_{i:03d}.csv")
        export_density_csv(density, out_dir / f"density_{i:03d}.csv",
                           scene_hash=scene.scene_hash)
        report_payload.append(
            {
                "incident": i,
                "panel_count": report.panel_count,
                "condition_estimate": report.condition_estimate,
                "residual_norm": report.residual_norm,
                "rhs_norm": report.rhs_norm,
                "wall_time_s": report.wall_time_s,
            }
        )
        print(
            f"[PASS] forward[{i}]: residual {report.residual_norm:.3e} "
            f"(<= 1e-10 * rhs norm {report.rhs_norm:.3e})"
        )
    with open(out_dir / "solve_report.json", "w", encoding="utf-8") as fh:
        json.dump({"scene_hash": scene.scene_hash, "solves": report_payload}, fh, indent=2)
    return True


if __name__ == "__main__":
    sys.exit(main())
