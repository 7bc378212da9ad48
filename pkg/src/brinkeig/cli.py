# -*- coding: utf-8 -*-
"""Command-line front end.

Subcommands: `converge` runs a uniform-level study, `adapt` runs the
adaptive loop, `export` writes a single solve as VTK.  Exit codes: 0
success, 2 configuration error, 3 solver failure.

Heavy modules are imported inside the commands so --threads can cap the
BLAS thread pools before they load.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _apply_threads(n):
    if n is None:
        return
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, str(n))


def _out_dir(cfg, args):
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out, cfg, command, timings, outputs):
    import numpy
    import scipy

    from . import __version__

    canonical = json.dumps(cfg.canonical(), sort_keys=True)
    manifest = {
        "command": command,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "config": cfg.canonical(),
        "versions": {
            "brinkeig": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
        "timings_ms": timings,
        "outputs": sorted(str(p) for p in outputs),
    }
    path = out / "manifest.json"
    with open(path, "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def _snapshot_writer(out, layout_getter=None):
    from .vtkio import eigenpair_point_data, write_vtk

    def hook(iteration, mesh, layout, pair, fld):
        path = out / ("iter_%03d.vtk" % iteration)
        write_vtk(
            path,
            mesh,
            cell_data={
                "subdomain": mesh.cell_subdomain,
                "eta_T": fld.eta_T,
            },
            point_data=eigenpair_point_data(layout, pair),
        )

    return hook


def cmd_converge(args):
    from .config import ConfigError, load_config
    from .mesh2d import MeshError

    try:
        cfg = load_config(args.config)
        if cfg.study["mode"] != "uniform":
            raise ConfigError("converge needs a study of mode 'uniform'")
        cfg.build_mesh(cfg.study["levels"][0])  # surface geometry errors early
    except (ConfigError, MeshError, ValueError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    return _run_converge(cfg, args)


def _run_converge(cfg, args):
    from .assembly import assemble_pencil, build_layout, dump_matrix_market
    from .eigensolve import EigenSolveError, SingularMatrixError
    from .study import render_markdown, run_uniform_study, write_csv
    from .vtkio import write_vtk

    out = _out_dir(cfg, args)
    t0 = time.perf_counter()
    try:
        result = run_uniform_study(
            cfg.mesh_factory(),
            cfg.element_family(),
            cfg.physical_params(),
            cfg.study["levels"],
            nev=cfg.nev,
            solver=cfg.solver_config(),
            compute_eta=cfg.study.get("compute_eta", False),
            include_gamma2=cfg.estimator.get("gamma2_term"),
        )
    except SingularMatrixError as exc:
        print(
            "configuration error: the assembled system is singular (%s); "
            "check the boundary variant and permeability settings" % exc,
            file=sys.stderr,
        )
        return EXIT_CONFIG
    except EigenSolveError as exc:
        print("solver failure: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER
    outputs = []
    csv_path = out / "study.csv"
    write_csv(csv_path, result.records, cfg.nev)
    outputs.append(csv_path)
    md_path = out / "study.md"
    with open(md_path, "w") as handle:
        handle.write(render_markdown(result))
    outputs.append(md_path)
    if args.snapshots:
        for record in result.records:
            mesh = cfg.build_mesh(record.level)
            path = out / ("mesh_N%03d.vtk" % record.level)
            write_vtk(path, mesh, cell_data={"subdomain": mesh.cell_subdomain})
            outputs.append(path)
    if args.matrix_dump:
        mesh = cfg.build_mesh(cfg.study["levels"][0])
        layout = build_layout(mesh, cfg.element_family())
        K, M = assemble_pencil(layout, cfg.physical_params())
        for name, mat in (("K", K), ("M", M)):
            path = out / ("%s.mtx" % name)
            dump_matrix_market(path, mat)
            outputs.append(path)
    timings = {"total": 1e3 * (time.perf_counter() - t0)}
    outputs.append(_write_manifest(out, cfg, "converge", timings, outputs))
    for fit, i in zip(result.fits, range(cfg.nev)):
        order = "%.2f" % fit.order if fit.order is not None else "n/a"
        print(
            "lambda_%d: extrapolated %.6f, fitted order %s"
            % (i + 1, fit.lam_extr, order)
        )
    print("wrote %s" % csv_path)
    return EXIT_OK


def cmd_adapt(args):
    from .config import ConfigError, load_config
    from .mesh2d import MeshError

    try:
        cfg = load_config(args.config)
        if cfg.study["mode"] != "adaptive":
            raise ConfigError("adapt needs a study of mode 'adaptive'")
        cfg.build_mesh()
    except (ConfigError, MeshError, ValueError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    return _run_adapt(cfg, args)


def _run_adapt(cfg, args):
    import numpy as np

    from .adapt import AdaptiveRun, AdaptiveSolveError, run_adaptive
    from .assembly import assemble_pencil, build_layout, dump_matrix_market
    from .eigensolve import EigenSolveError, SingularMatrixError
    from .study import write_csv

    out = _out_dir(cfg, args)
    study = cfg.study
    run = AdaptiveRun(
        target=study.get("target", 1),
        theta=study.get("theta", 0.5),
        max_iterations=study["max_iterations"],
        dof_budget=study.get("dof_budget"),
        lambda_ref=study.get("lambda_ref"),
        nev=cfg.nev,
    )
    hook = _snapshot_writer(out) if args.snapshots else None
    t0 = time.perf_counter()
    try:
        records = run_adaptive(
            cfg.build_mesh(),
            cfg.element_family(),
            cfg.physical_params(),
            run,
            solver=cfg.solver_config(),
            include_gamma2=cfg.estimator.get("gamma2_term"),
            snapshot_hook=hook,
        )
    except SingularMatrixError as exc:
        print(
            "configuration error: the assembled system is singular (%s)" % exc,
            file=sys.stderr,
        )
        return EXIT_CONFIG
    except AdaptiveSolveError as exc:
        print("solver failure: %s" % exc, file=sys.stderr)
        if exc.records:
            write_csv(out / "history_partial.csv", exc.records, cfg.nev)
        return EXIT_SOLVER
    except EigenSolveError as exc:
        print("solver failure: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER
    outputs = []
    csv_path = out / "history.csv"
    write_csv(csv_path, records, cfg.nev)
    outputs.append(csv_path)
    if args.snapshots:
        outputs.extend(sorted(out.glob("iter_*.vtk")))
    if args.matrix_dump:
        mesh = cfg.build_mesh()
        layout = build_layout(mesh, cfg.element_family())
        K, M = assemble_pencil(layout, cfg.physical_params())
        for name, mat in (("K", K), ("M", M)):
            path = out / ("%s.mtx" % name)
            dump_matrix_market(path, mat)
            outputs.append(path)
    timings = {"total": 1e3 * (time.perf_counter() - t0)}
    outputs.append(_write_manifest(out, cfg, "adapt", timings, outputs))
    target = run.target
    if run.lambda_ref is not None and len(records) >= 3:
        data = np.array(
            [[r.dof, float(r.err)] for r in records if r.err and r.err > 0]
        )
        if len(data) >= 2:
            slope = np.polyfit(np.log(data[:, 0]), np.log(data[:, 1]), 1)[0]
            print("err(lambda_%d) vs dof slope: %.3f" % (target, slope))
    print("final dof %d, lambda_%d = %.6f" % (
        records[-1].dof, target, records[-1].eigenvalues[target - 1]))
    print("wrote %s" % csv_path)
    return EXIT_OK


def cmd_export(args):
    from .config import ConfigError, load_config
    from .mesh2d import MeshError

    try:
        cfg = load_config(args.config)
        if args.what == "eigenfunction" and args.index > cfg.nev:
            raise ConfigError(
                "eigenfunction index %d exceeds nev=%d" % (args.index, cfg.nev)
            )
        cfg.build_mesh()
    except (ConfigError, MeshError, ValueError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    return _run_export(cfg, args)


def _run_export(cfg, args):
    from .assembly import assemble_pencil, build_layout, dump_matrix_market
    from .eigensolve import EigenSolveError, smallest_eigenpairs
    from .estimate import local_indicators
    from .vtkio import eigenpair_point_data, write_vtk

    out = _out_dir(cfg, args)
    mesh = cfg.build_mesh()
    outputs = []
    t0 = time.perf_counter()
    if args.what == "mesh":
        path = out / "mesh.vtk"
        write_vtk(path, mesh, cell_data={"subdomain": mesh.cell_subdomain})
        outputs.append(path)
    else:
        layout = build_layout(mesh, cfg.element_family())
        K, M = assemble_pencil(layout, cfg.physical_params())
        if args.matrix_dump:
            for name, mat in (("K", K), ("M", M)):
                path = out / ("%s.mtx" % name)
                dump_matrix_market(path, mat)
                outputs.append(path)
        try:
            pairs = smallest_eigenpairs(K, M, layout, cfg.solver_config())
        except EigenSolveError as exc:
            print("solver failure: %s" % exc, file=sys.stderr)
            return EXIT_SOLVER
        if args.what == "eigenfunction":
            pair = pairs[args.index - 1]
            path = out / ("eigenfunction_%d.vtk" % args.index)
            write_vtk(
                path,
                mesh,
                cell_data={"subdomain": mesh.cell_subdomain},
                point_data=eigenpair_point_data(layout, pair),
            )
            outputs.append(path)
        else:
            pair = pairs[0]
            fld = local_indicators(
                layout, cfg.physical_params(), pair,
                cfg.estimator.get("gamma2_term"),
            )
            path = out / "indicators.vtk"
            write_vtk(
                path,
                mesh,
                cell_data={
                    "subdomain": mesh.cell_subdomain,
                    "eta_T": fld.eta_T,
                },
                point_data=eigenpair_point_data(layout, pair),
            )
            outputs.append(path)
    timings = {"total": 1e3 * (time.perf_counter() - t0)}
    outputs.append(_write_manifest(out, cfg, "export", timings, outputs))
    for path in outputs:
        print("wrote %s" % path)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="brinkeig",
        description="Flow eigenvalue studies on heterogeneous porous domains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON problem configuration")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--threads", type=int, default=1, help="BLAS thread cap")
        p.add_argument("--snapshots", action="store_true",
                       help="write VTK snapshots")
        p.add_argument("--matrix-dump", action="store_true",
                       help="dump assembled matrices in Matrix Market format")

    p = sub.add_parser("converge", help="uniform refinement convergence study")
    common(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("adapt", help="adaptive refinement run")
    common(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("export", help="single solve and VTK export")
    common(p)
    p.add_argument(
        "--what",
        choices=["mesh", "eigenfunction", "indicators"],
        default="mesh",
    )
    p.add_argument("--index", type=int, default=1,
                   help="1-based eigenfunction index")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    _apply_threads(args.threads)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
