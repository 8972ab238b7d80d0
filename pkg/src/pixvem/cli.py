"""Command line driver: mesh, solve, fem, study, plot.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import json
import logging
import sys

from . import agglomeration, assembly, condensation, errors, fem, geometry, pixelmesh, plotting, study, vemspace
from .exceptions import ConfigError, NumericalError

logger = logging.getLogger("pixvem")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _graded(text):
    try:
        cx, cy, lev = text.split(",")
        return (float(cx), float(cy)), int(lev)
    except ValueError as exc:
        raise ConfigError(f"--graded expects cx,cy,levels, got {text!r}") from exc


def _on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _add_common(p, sizes=True):
    p.add_argument("--case", default="test1a", help="test1a, test1a-cone, test1b or bean")
    p.add_argument("--rule", default="contained", choices=pixelmesh.RULES)
    if sizes:
        p.add_argument("--H", type=study.parse_size, default=0.125, help="element size (e.g. 2^-4, 1/16)")
        p.add_argument("--tau-hat", type=study.parse_size, default=None, help="h/H (default 1/ratio)")
        p.add_argument("--ratio", type=int, default=4, help="agglomeration ratio m = H/h")


def _tau(args):
    return args.tau_hat if args.tau_hat is not None else 1.0 / args.ratio


def cmd_mesh(args):
    if args.mask:
        grid = pixelmesh.load_mask(args.mask, origin=tuple(args.origin), h=args.h)
        domain = None
    else:
        domain = (geometry.builtin_domain(args.domain) if args.domain
                  else geometry.builtin_case(args.case).domain)
        h = args.h if args.h else _tau(args) * args.H
        grid = pixelmesh.classify_pixels(domain, h, rule=args.rule)
    if args.graded:
        corner, levels = _graded(args.graded)
        mesh = agglomeration.agglomerate_graded(grid, corner, args.ratio, levels)
    else:
        mesh = agglomeration.agglomerate_uniform(grid, args.ratio)
    report = agglomeration.audit_assumption(mesh)
    report.pop("elements")
    report["pixels"] = grid.n_inside
    if domain is not None:
        report["pixel_domain"] = pixelmesh.sanity_check(grid, domain)
    if args.order:
        dofmap = vemspace.build_dof_map(mesh, args.order)
        cmap = condensation.build_condensation(mesh, dofmap, vemspace.build_all(mesh, dofmap))
        report["dofs"] = {"k": args.order, "total": dofmap.N, "retained": cmap.n_retained,
                          "lazy": cmap.n_lazy,
                          "lazy_per_macro_edge": [lb.n_lazy for lb in cmap.bases]}
    print(json.dumps(report, indent=1, sort_keys=True))
    if args.svg:
        agglomeration.render_svg(mesh, args.svg)
    if args.json:
        agglomeration.dump_json(mesh, args.json)
    return EXIT_OK


def _bdt_config(args, k):
    return assembly.BdtConfig(k=k, k_star=args.k_star, gamma=args.gamma, beta=args.beta,
                              first_term=args.first_term)


def cmd_solve(args):
    case = geometry.builtin_case(args.case)
    graded = _graded(args.graded) if args.graded else None
    tau = _tau(args)
    mesh = study.build_mesh(case.domain, args.H, tau, args.rule, graded)
    res = study.solve_vem(case, mesh, _bdt_config(args, args.order), args.condense)
    errors.write_csv([res.record], sys.stdout)
    if args.json:
        fields = [{"element": op.index, "x_K": op.basis.center.tolist(), "scale": op.basis.size,
                   "pi_nabla": (op.Pi_star @ res.u[op.dofs]).tolist(),
                   "pi_zero": (op.Pi0_star @ res.u[op.dofs]).tolist()} for op in res.ops]
        with open(args.json, "w") as fh:
            json.dump({"record": errors.as_dict(res.record), "dofs": res.u.tolist(),
                       "relative_residual": res.report.relative_residual,
                       "elements": fields}, fh)
    return EXIT_OK


def cmd_fem(args):
    case = geometry.builtin_case(args.case)
    grid = pixelmesh.classify_pixels(case.domain, args.h, rule=args.rule)
    cfg = fem.FemConfig(k=args.order, gamma=args.gamma, k_star=args.k_star, g_star_mode=args.g_star_mode)
    sol, rec = fem.fem_solve(grid, case, cfg)
    errors.write_csv([rec], sys.stdout)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"record": errors.as_dict(rec), "dofs": sol.values.tolist()}, fh)
    return EXIT_OK


def cmd_study(args):
    if args.preset:
        data = study.load_preset(args.preset)
    elif args.config:
        data = study.load_config(args.config)
    else:
        raise ConfigError("study needs --preset or --config")
    for key in ("k", "tau_hat", "H", "levels"):
        val = getattr(args, key)
        if val:
            data[key] = val
    for key in ("gamma", "beta", "k_star", "rule", "method", "case"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if args.condense is not None:
        data["condense"] = args.condense
    data["csv"] = args.out
    result = study.run_study(study.StudyConfig.from_dict(data))
    if not args.out:
        errors.write_csv(result.records, sys.stdout)
    for (method, k, tau), sl in sorted(result.slopes.items()):
        logger.info("%s k=%d tau_hat=%g: slope e0 %.2f, e1 %.2f", method, k, tau, sl["e0"], sl["e1"])
    for key, val in result.extra.items():
        logger.info("%s = %.4f", key, val)
    return EXIT_OK


def cmd_plot(args):
    plotting.plot_svg(args.csv, args.kind, args.out, args.metric)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="pixvem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", parents=[verbose], help="classify pixels, agglomerate, audit")
    _add_common(p)
    p.add_argument("--domain", default=None, help="disk, square or bean (overrides --case)")
    p.add_argument("--h", type=study.parse_size, default=None, help="pixel size (default tau_hat * H)")
    p.add_argument("--mask", default=None, help="PGM or 0/1 CSV mask instead of a domain")
    p.add_argument("--origin", type=float, nargs=2, default=(0.0, 0.0))
    p.add_argument("--graded", default=None, help="cx,cy,levels")
    p.add_argument("--svg", default=None)
    p.add_argument("--json", default=None)
    p.add_argument("--order", "-k", type=int, default=None, help="also report retained/lazy DOF counts")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", parents=[verbose], help="VEM solve on one mesh, CSV row on stdout")
    _add_common(p)
    p.add_argument("--order", "-k", type=int, default=1)
    p.add_argument("--k-star", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--first-term", choices=("raw", "projected"), default="raw")
    p.add_argument("--condense", type=_on_off, default=True, help="on|off")
    p.add_argument("--graded", default=None, help="cx,cy,levels (H is the coarse size)")
    p.add_argument("--json", default=None, help="write DOFs and projected fields")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("fem", parents=[verbose], help="Q_k FEM with Nitsche (or BDT) on the pixel mesh")
    _add_common(p, sizes=False)
    p.add_argument("--h", type=study.parse_size, default=0.125)
    p.add_argument("--order", "-k", type=int, default=1)
    p.add_argument("--k-star", type=int, default=0)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--g-star-mode", choices=("projected", "trace"), default="projected")
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_fem)

    p = sub.add_parser("study", parents=[verbose], help="convergence study from a preset or JSON config")
    p.add_argument("--preset", default=None, help=", ".join(study.preset_names()))
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--case", default=None)
    p.add_argument("--method", default=None, choices=study.METHODS)
    p.add_argument("--k", type=int, nargs="+", default=None)
    p.add_argument("--tau-hat", dest="tau_hat", type=study.parse_size, nargs="+", default=None)
    p.add_argument("--H", type=str, nargs="+", default=None)
    p.add_argument("--levels", type=int, nargs="+", default=None)
    p.add_argument("--k-star", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--rule", default=None, choices=pixelmesh.RULES)
    p.add_argument("--condense", type=_on_off, default=None)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("plot", parents=[verbose], help="log-log SVG from a study CSV")
    p.add_argument("csv")
    p.add_argument("--kind", default="error_vs_H", choices=plotting.KINDS)
    p.add_argument("--metric", default="e1", choices=("e0", "e1"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"pixvem: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as exc:
        print(f"pixvem: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"pixvem: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
