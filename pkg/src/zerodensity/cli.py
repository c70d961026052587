"""Command line interface.

Subcommands: ``check``, ``spectrum``, ``density``, ``montecarlo`` and
``export-ply``.  Exit codes: 1 validation, 2 numerical, 3 I/O.  Failures are
reported as one line on standard error::

    error: category=validation type=NotClosed message="..."
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import build_levi_civita_connection, curvature_from_holonomy, degree_residual
from .closed_form import closed_form_density, default_schedule
from .errors import EXIT_CODES, ValidationError, ZeroDensityError
from .fileio import RunConfig, csv_text, read_connection_csv, read_curvature_csv, read_field_csv, write_ply, write_text
from .mesh import load_mesh
from .montecarlo import compare_report, empirical_index_stats
from .problem import BundleSetup


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _diag("validation", "UsageError", message)
        sys.exit(EXIT_CODES["validation"])


def _diag(category, kind, message):
    msg = str(message).replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ")
    print(f'error: category={category} type={kind} message="{msg}"', file=sys.stderr)


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    for item in args.set or []:
        if "=" not in item:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        cfg.set(key.strip(), val)
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "output", None):
        cfg.output = args.output
    return cfg.validate()


def _setup(cfg: RunConfig) -> BundleSetup:
    mesh = load_mesh(cfg.mesh)
    conn = build_levi_civita_connection(mesh) if cfg.connection == "levi-civita" else read_connection_csv(cfg.connection, mesh)
    curv = curvature_from_holonomy(mesh, conn) if cfg.curvature == "holonomy" else read_curvature_csv(cfg.curvature, conn)
    setup = BundleSetup.from_mesh(mesh, conn, curv)
    setup.degree  # validate integrality early
    return setup


def _basis(setup, cfg):
    return setup.eigenbasis(None if cfg.k == 0 else cfg.k, tol=cfg.tol)


def _times(cfg, basis):
    ts = cfg.time_list()
    if cfg.time_unit == "lambda2":
        if basis.k < 2:
            raise ValidationError("time_unit = lambda2 needs k >= 2")
        ts = [t / basis.eigenvalues[1] for t in ts]
    return ts


def _schedule(cfg, basis, extra):
    t_max = float(cfg.t_max) if cfg.t_max else None
    if t_max is None and basis.k < 2:
        t_max = max(extra, default=0.0) or 10.0 / basis.eigenvalues[0]
    ts = default_schedule(basis, t_max=t_max, t0=float(cfg.t0) if cfg.t0 else None, growth=cfg.growth, extra=extra)
    return ts


def cmd_check(args):
    mesh = load_mesh(args.mesh)
    conn = build_levi_civita_connection(mesh)
    curv = curvature_from_holonomy(mesh, conn)
    d, res = degree_residual(curv)
    if res > 1e-6:
        from .errors import NotInteger
        raise NotInteger(f"total curvature / 2 pi deviates from {d} by {res:.3e}")
    g = mesh.geometry
    print(f"vertices={mesh.n_vertices} edges={mesh.n_edges} faces={mesh.n_faces} euler={mesh.euler_characteristic}")
    print(f"area={g.total_area!r} negative_cotan_edges={int((g.cotan_weight < 0).sum())}")
    print(f"degree_residue={res:.3e}")
    print(f"deg={d}")
    return 0


def cmd_spectrum(args):
    cfg = _load_config(args)
    setup = _setup(cfg)
    b = _basis(setup, cfg)
    out = Path(cfg.output) / "spectrum.csv"
    write_text(out, csv_text(["l", "lambda", "residual"],
                             [(i + 1, lam, r) for i, (lam, r) in enumerate(zip(b.eigenvalues, b.residuals))]))
    print(f"wrote {out} ({b.k} eigenpairs, lambda_1={float(b.eigenvalues[0])!r})")
    return 0


def cmd_density(args):
    cfg = _load_config(args)
    setup = _setup(cfg)
    b = _basis(setup, cfg)
    want = _times(cfg, b)
    ts = _schedule(cfg, b, want)
    fld = closed_form_density(b, setup.mesh, setup.curvature, ts)
    out = Path(cfg.output)
    F = setup.mesh.n_faces
    rows = ((f, fld.t[m], fld.omega[m, f], fld.expected_index[m, f], fld.density[m, f])
            for m in range(len(fld.t)) for f in range(F))
    write_text(out / "density.csv", csv_text(["face", "t", "omega", "I", "P"], rows))
    if cfg.ply:
        for i, t in enumerate(want):
            m = int(np.searchsorted(fld.t, t))
            write_ply(out / f"density_{i}.ply", setup.mesh, fld.density[m])
    print(f"wrote {out / 'density.csv'} ({len(fld.t)} times x {F} faces)")
    print(f"conservation residual max={fld.conservation_residual.max():.3e} "
          f"unanchored_faces={int((~fld.confident).sum())} refined_faces={int(fld.refined.sum())}")
    return 0


def cmd_montecarlo(args):
    cfg = _load_config(args)
    setup = _setup(cfg)
    b = _basis(setup, cfg)
    want = _times(cfg, b) or [0.0]
    fld = closed_form_density(b, setup.mesh, setup.curvature, _schedule(cfg, b, want))
    out = Path(cfg.output)
    stat_rows, cmp_rows, lines = [], [], []
    for t in want:
        st = empirical_index_stats(setup, t, cfg.samples, cfg.seed, basis=b, workers=cfg.workers)
        rep = compare_report(st, fld.at(t))
        mean, se = st.mean, st.stderr
        stat_rows += [(f, t, st.count, mean[f], se[f]) for f in range(setup.mesh.n_faces)]
        cmp_rows += [(f, t, rep.mean[f], rep.stderr[f], rep.expected[f], rep.z[f], int(not rep.within[f]))
                     for f in range(setup.mesh.n_faces)]
        lines.append(f"t={float(t)!r}  samples={st.count} degenerate={st.n_degenerate}\n{rep.summary()}")
    write_text(out / "montecarlo.csv", csv_text(["face", "t", "count", "mean", "stderr"], stat_rows))
    write_text(out / "compare.csv", csv_text(["face", "t", "mc_mean", "mc_stderr", "closed_form", "z", "flag"], cmp_rows))
    print("\n\n".join(lines))
    print(f"wrote {out / 'montecarlo.csv'} and {out / 'compare.csv'}")
    return 0


def cmd_export_ply(args):
    mesh = load_mesh(args.mesh)
    vals = read_field_csv(args.field, mesh.n_faces, args.column, args.t)
    out = args.output or str(Path(args.field).with_suffix(".ply"))
    write_ply(out, mesh, vals)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="zerodensity", description="Expected zero densities of smoothed random sections on meshes.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--dump-config", action="store_true", help="print the default configuration and exit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    c = sub.add_parser("check", help="validate a mesh and print the bundle degree")
    c.add_argument("mesh")
    c.set_defaults(func=cmd_check)

    def with_config(name, func, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config")
        s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")
        s.add_argument("-o", "--output", help="output directory (overrides config)")
        s.set_defaults(func=func)
        return s

    with_config("spectrum", cmd_spectrum, "eigenvalues CSV")
    with_config("density", cmd_density, "closed-form expected index over the t schedule")
    mc = with_config("montecarlo", cmd_montecarlo, "Monte Carlo statistics and comparison")
    mc.add_argument("--workers", type=int, help="worker threads (result does not depend on it)")

    e = sub.add_parser("export-ply", help="colour a per-face field onto a mesh")
    e.add_argument("field")
    e.add_argument("mesh")
    e.add_argument("--column")
    e.add_argument("--t", type=float)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_export_ply)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.dump_config:
        sys.stdout.write(RunConfig().dump())
        return 0
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_CODES["validation"]
    try:
        return args.func(args)
    except ZeroDensityError as exc:
        _diag(exc.category, type(exc).__name__, exc)
        return EXIT_CODES[exc.category]
    except (OSError, UnicodeDecodeError) as exc:
        _diag("io", type(exc).__name__, exc)
        return EXIT_CODES["io"]
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _diag("numerical" if not isinstance(exc, ValueError) else "validation", type(exc).__name__, exc)
        return EXIT_CODES["numerical" if not isinstance(exc, ValueError) else "validation"]


if __name__ == "__main__":
    sys.exit(main())
