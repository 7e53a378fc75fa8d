"""Command-line entry point.

    magfem study <config.ini>    uniform-refinement convergence study
    magfem adaptive <config.ini> residual-driven adaptive magnet run
    magfem mesh-info <mesh>      summarize a mesh file

Exit codes: 0 success, 1 configuration error, 2 numerical failure. A run
that dies mid-study still flushes the rows it completed to --csv.
"""

import argparse
import sys

import numpy as np

from .errors import (
    ConfigError,
    ConvergenceError,
    FitError,
    MeshError,
    SingularMatrixError,
)
from .mesh import load_msh, load_txt, mesh_size
from .report import emit_vtk, format_table, render_figures, write_csv
from .study import StudyConfig, run_adaptive, run_study


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; route them through the
    # config-error path instead so exit codes stay meaningful
    def error(self, message):
        raise ConfigError(message)


def _build_parser():
    parser = _Parser(prog="magfem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("study", "adaptive"):
        p = sub.add_parser(name)
        p.add_argument("config", help="INI study configuration")
        p.add_argument("--csv", help="write the report rows to this file")
        p.add_argument("--vtk", help="write final-level field dumps to this directory")
        p.add_argument("--figures", help="render figures into this directory")
        p.add_argument("--seed", type=int, help="seed for randomized paths")
        p.add_argument(
            "--deterministic",
            action="store_true",
            help="force sequential accumulation (byte-stable output)",
        )
    p = sub.add_parser("mesh-info")
    p.add_argument("mesh", help="mesh file (.msh or .txt)")
    return parser


def _load_any_mesh(path):
    if path.endswith(".txt"):
        return load_txt(path)
    return load_msh(path)


def _emit(report, args):
    print(format_table(report))
    if args.csv:
        write_csv(report, args.csv)
    if args.figures:
        for p in render_figures(report, args.figures):
            print(f"figure: {p}")
    if args.vtk and report.field_dump is not None:
        import os

        os.makedirs(args.vtk, exist_ok=True)
        mesh, fields = report.field_dump
        path = os.path.join(args.vtk, "fields.vtk")
        emit_vtk(mesh, fields, path)
        print(f"vtk: {path}")


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "mesh-info":
            mesh = _load_any_mesh(args.mesh)
            regions, counts = np.unique(mesh.tri_region, return_counts=True)
            print(f"nodes: {mesh.num_nodes}")
            print(f"triangles: {mesh.num_triangles}")
            print(f"boundary edges: {mesh.boundary_edges.shape[0]}")
            print(f"mesh size: {mesh_size(mesh):.6g}")
            for tag, cnt in zip(regions, counts):
                print(f"region {tag}: {cnt} triangles")
            return 0
        if args.seed is not None:
            np.random.seed(args.seed)
        config = StudyConfig.from_ini(args.config)
        runner = run_study if args.command == "study" else run_adaptive
        try:
            report = runner(config)
        except Exception as exc:
            partial = getattr(exc, "partial", None)
            if partial is not None and args.csv and partial.rows:
                write_csv(partial, args.csv)
                print(f"partial report flushed to {args.csv}", file=sys.stderr)
            raise
        _emit(report, args)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (
        ConvergenceError,
        FitError,
        MeshError,
        SingularMatrixError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
