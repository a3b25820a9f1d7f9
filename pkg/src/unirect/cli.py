"""Command-line front end.

Exit codes: 0 on success, 2 when a probe's hypothesis is not met, 1 on
errors.  ``--config FILE`` reads ``key = value`` lines whose keys are option
names (dashes or underscores); flags given on the command line win.
"""
import argparse
import configparser
import sys

import numpy as np

from . import carleson, flatness, io, measure, probes, riesz
from .config import ProbeConfig
from .cubes import build_cubes, finest_generation, verify_cube_axioms
from .errors import HypothesisNotMet, ParameterError, UnirectError
from .generators import KINDS, GeneratorSpec
from .geometry import Ball
from .report import dumps, make_report

DEFAULT_DIMS = {"flat-plane": (3, 2), "light-cone": (4, 3),
                "cone-product": (5, 4), "lipschitz-graph": (3, 2),
                "four-corner-cantor": (2, 1)}
PROBES = ("find-flat-ball", "touching-ball", "touch-pairing",
          "dimension-descent", "flat-to-bilateral", "stability",
          "persistence", "bpg")
PROBE_FIELDS = ("eps", "delta", "delta0", "delta1", "eta", "tau", "tau0",
                "kappa", "N", "M", "c1", "c2", "samples")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of "
                                         f"numbers: {text!r}") from None


def _common(p, output_required=True):
    p.add_argument("--config", help="key = value file of option defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1,
                   help="worker threads; results do not depend on it")
    p.add_argument("-o", "--output", required=output_required)


def _input(p):
    p.add_argument("--input", required=True, help="CSV or JSON point cloud")
    p.add_argument("--n", type=int, help="intrinsic dimension if the file "
                   "does not record it")


def _forest_args(p, span=5):
    p.add_argument("--j-min", type=int, default=0)
    p.add_argument("--j-max", type=int,
                   help=f"default: j_min + {span} or the finest resolvable "
                        "generation, whichever is smaller")


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1 like other errors; 2 is reserved for probes
    def error(self, message):
        raise ParameterError(f"{self.prog}: {message}")


def build_parser():
    ap = _Parser(prog="unirect", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a model measure to CSV")
    _common(p)
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--slope", type=float, default=0.5)
    p.add_argument("--grading", choices=("uniform", "log"), default="uniform")
    p.add_argument("--grading-ratio", type=float, default=1e4)
    p.add_argument("--spec", help="generator config file (key = value)")

    p = sub.add_parser("cubes", help="build and verify a dyadic cube forest")
    _common(p)
    _input(p)
    _forest_args(p)
    p.add_argument("--members", action="store_true",
                   help="include member indices in the export")

    p = sub.add_parser("beta", help="beta profile at a point")
    _common(p)
    _input(p)
    p.add_argument("--center", required=True,
                   help="'vertex' (support point nearest the origin), "
                        "'index:K' or comma-separated coordinates")
    p.add_argument("--radii", type=_floats, required=True)
    p.add_argument("--bilateral", action="store_true",
                   help="also compute bbeta (slower)")
    p.add_argument("--report", help="optional JSON report path")

    p = sub.add_parser("riesz", help="Riesz pairing bound scan")
    _common(p)
    _input(p)
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--ratios", type=_floats, default=[10, 100, 1000])
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--csv", help="optional CSV table r,s,ratio,pairing")

    p = sub.add_parser("carleson", help="packing of the bbeta > t family")
    _common(p)
    _input(p)
    _forest_args(p)
    p.add_argument("--threshold", type=float, default=0.1)

    p = sub.add_parser("wcd", help="constant-density surrogate scan")
    _common(p)
    _input(p)
    _forest_args(p)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--c1p", type=float)
    p.add_argument("--csv", help="optional CSV x...,r,deviation,lambda,member")

    p = sub.add_parser("trees", help="N(eps) flags and tree decomposition")
    _common(p)
    _input(p)
    _forest_args(p)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--root", default="top",
                   help="'top' or a cube id 'J,K'")

    p = sub.add_parser("probe", help="run one lemma probe")
    _common(p)
    _input(p)
    p.add_argument("--name", choices=PROBES, required=True)
    p.add_argument("--center", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--m", type=int, help="plane dimension (dimension-descent)")
    p.add_argument("--slope", type=float, default=1.0, help="bpg slope")
    p.add_argument("--tau-floor", type=float)
    for f in PROBE_FIELDS:
        p.add_argument(f"--{f}", type=int if f in ("N", "samples") else float)

    p = sub.add_parser("uniformity", help="density spread over random balls")
    _common(p)
    _input(p)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--r-min", type=float, required=True)
    p.add_argument("--r-max", type=float, required=True)
    return ap


def _config_defaults(path):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    with open(path, encoding="utf-8") as fh:
        cp.read_string("[options]\n" + fh.read())
    return {k.replace("-", "_"): v for k, v in cp["options"].items()}


_BOOLS = configparser.ConfigParser.BOOLEAN_STATES


def _config_path(argv):
    for k, a in enumerate(argv):
        if a == "--config" and k + 1 < len(argv):
            return argv[k + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def parse_args(argv):
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    path = _config_path(argv)
    if path and argv and argv[0] in ap._subparsers._group_actions[0].choices:
        sp = ap._subparsers._group_actions[0].choices[argv[0]]
        known = {a.dest: a for a in sp._actions}
        defaults = {}
        for k, v in _config_defaults(path).items():
            if k not in known:
                raise ParameterError(f"unknown option {k!r} in {path}")
            act = known[k]
            if isinstance(act, argparse._StoreTrueAction):
                if v.strip().lower() not in _BOOLS:
                    raise ParameterError(f"{k} in {path}: expected true/false")
                defaults[k] = _BOOLS[v.strip().lower()]
            else:
                defaults[k] = act.type(v) if act.type else v
            # a value from the file satisfies a required option
            act.required = False
        sp.set_defaults(**defaults)
    return ap.parse_args(argv)


def _center(mu, text):
    if text == "vertex":
        _, k = mu.nearest(np.zeros(mu.d))
        return mu.points[int(k[0])].copy()
    if text.startswith("index:"):
        k = int(text.split(":", 1)[1])
        if not 0 <= k < mu.size:
            raise ParameterError(f"index {k} out of range")
        return mu.points[k].copy()
    x = np.array(_floats(text))
    if x.size != mu.d:
        raise ParameterError(f"centre has {x.size} coordinates, need {mu.d}")
    return x


def _forest(mu, args):
    j_max = args.j_max
    if j_max is None:
        j_max = min(args.j_min + 5, finest_generation(mu, args.j_min))
    return build_cubes(mu, args.j_min, j_max)


def _write(path, text):
    io.write_text(path, text)


def cmd_generate(args):
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = GeneratorSpec.from_config(fh.read())
    else:
        if not args.kind:
            raise ParameterError("need --kind or --spec")
        d, n = DEFAULT_DIMS[args.kind]
        spec = GeneratorSpec(kind=args.kind, d=args.d or d, n=args.n or n,
                             extent=args.extent, count=args.count,
                             slope=args.slope, seed=args.seed,
                             grading=args.grading,
                             grading_ratio=args.grading_ratio)
    io.write_generated(spec, args.output)
    return 0


def cmd_cubes(args, mu):
    forest = _forest(mu, args)
    results = {"forest": forest.to_json(args.members),
               "axioms": verify_cube_axioms(forest, mu),
               "j_min": forest.j_min, "j_max": forest.j_max}
    rep = make_report("cubes", _params(args), results,
                      4 * mu.spacing * forest.scale, args.seed)
    _write(args.output, dumps(rep))
    return 0


def cmd_beta(args, mu):
    x = _center(mu, args.center)
    prof = flatness.beta_profile(mu, x, sorted(args.radii),
                                 bilateral=args.bilateral, seed=args.seed)
    _write(args.output, flatness.profile_csv(prof))
    if args.report:
        rows = [{"r": row["r"], "beta": row["beta"], "bbeta": row["bbeta"]}
                for row in prof]
        rep = make_report("beta", dict(_params(args), center_point=x), rows,
                          2 * mu.spacing / min(args.radii), args.seed)
        _write(args.report, dumps(rep))
    return 0


def cmd_riesz(args, mu):
    cfg = ProbeConfig(seed=args.seed, samples=args.samples)
    rr = None
    if args.r_min is not None or args.r_max is not None:
        if args.r_min is None or args.r_max is None:
            raise ParameterError("give both --r-min and --r-max")
        rr = (args.r_min, args.r_max)
    res = riesz.riesz_bound_scan(mu, cfg, r_range=rr, ratios=args.ratios,
                                 jobs=args.jobs)
    if args.csv:
        _write(args.csv, riesz.scan_csv(res))
    res = {k: v for k, v in res.items() if k != "table"}
    rep = make_report("riesz", _params(args), res, res["resolution_floor"],
                      args.seed)
    _write(args.output, dumps(rep))
    return 0


def cmd_carleson(args, mu):
    forest = _forest(mu, args)
    fam, vals = carleson.bbeta_family(mu, forest, args.threshold,
                                      jobs=args.jobs, seed=args.seed)
    roots = sorted(vals)
    chk = carleson.carleson_check(forest, fam, roots=roots)
    results = dict(chk, family=sorted(fam), scored=len(vals),
                   spread=carleson.profile_spread(chk["by_generation"]),
                   bbeta={f"{q[0]},{q[1]}": v for q, v in sorted(vals.items())})
    rep = make_report("carleson", _params(args), results,
                      2 * mu.spacing / (3 * forest.generations[-1][0].side),
                      args.seed)
    _write(args.output, dumps(rep))
    return 0


def cmd_wcd(args, mu):
    forest = _forest(mu, args)
    res = carleson.wcd_scan(mu, forest, args.eps, args.c1p, jobs=args.jobs,
                            seed=args.seed)
    if args.csv:
        _write(args.csv, carleson.wcd_csv(res, mu.d))
    rep = make_report("wcd", _params(args), res, 2 * mu.spacing, args.seed)
    _write(args.output, dumps(rep))
    return 0


def cmd_trees(args, mu):
    forest = _forest(mu, args)
    if args.root == "top":
        R = forest.generations[0][0].id
        if len(forest.generations[0]) != 1:
            raise ParameterError("top generation has several cubes; pass --root")
    else:
        R = tuple(int(v) for v in args.root.split(","))
    forest[R]
    flags, details = carleson.neps_flags(mu, forest, args.eps, jobs=args.jobs,
                                         seed=args.seed)
    trees = carleson.tree_decompose(forest, flags, R)
    errs = carleson.validate_decomposition(forest, flags, R, trees)
    if errs:
        raise UnirectError("tree decomposition failed validation: "
                           + "; ".join(errs[:5]))
    pack = carleson.tree_packing_check(trees, forest, R, flags=flags)
    results = {"trees": [t.to_dict() for t in trees], "flags": sorted(flags),
               "packing": pack, "root": list(R)}
    rep = make_report("trees", _params(args), results, 2 * mu.spacing,
                      args.seed)
    _write(args.output, dumps(rep))
    return 0


def _probe_cfg(args):
    kw = {f: getattr(args, f) for f in PROBE_FIELDS
          if getattr(args, f) is not None}
    return ProbeConfig(seed=args.seed, **kw)


def cmd_probe(args, mu):
    cfg = _probe_cfg(args)
    x = _center(mu, args.center)
    B = Ball(x, args.radius)
    name = args.name
    try:
        if name == "find-flat-ball":
            rep = probes.find_flat_ball(mu, B, cfg.eps,
                                        args.tau_floor or cfg.tau, seed=args.seed)
        elif name == "touching-ball":
            tb = probes.touching_ball(mu, B, cfg)
            rep = {"probe": "touching_ball", "config": cfg.to_dict(),
                   "hypothesis_met": None,
                   "measurements": {"radius": tb["ball"].radius},
                   "witnesses": {"ball": tb["ball"], "z0": tb["z0"],
                                 "normal": tb["normal"], "plane": tb["plane"]}}
        elif name == "touch-pairing":
            rep = probes.touch_pairing_probe(mu, B, cfg)
        elif name == "dimension-descent":
            if args.m is None:
                raise ParameterError("dimension-descent needs --m")
            rep = probes.dimension_descent(mu, B, args.m, cfg,
                                           tau_floor=args.tau_floor)
        elif name == "flat-to-bilateral":
            rep = probes.flat_to_bilateral_probe(mu, x, args.radius, cfg.delta,
                                                 seed=args.seed)
        elif name == "stability":
            rep = probes.stability_probe(mu, B, cfg)
        elif name == "persistence":
            rep = probes.persistence_probe(mu, B, cfg.delta, cfg.eta,
                                           cfg.samples, seed=args.seed)
        else:
            rep = probes.bpg_check(mu, B, args.slope, seed=args.seed)
    except HypothesisNotMet as exc:
        rep = exc.report
    out = make_report("probe", _params(args), rep, 2 * mu.spacing / args.radius,
                      args.seed)
    _write(args.output, dumps(out))
    return 2 if rep.get("hypothesis_met") is False else 0


def cmd_uniformity(args, mu):
    res = measure.uniformity_scan(mu, args.samples, (args.r_min, args.r_max),
                                  seed=args.seed)
    rep = make_report("uniformity", _params(args), res,
                      res["resolution_floor"], args.seed)
    _write(args.output, dumps(rep))
    return 0


def _params(args):
    skip = {"command", "jobs", "config", "output", "report", "csv"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


COMMANDS = {"cubes": cmd_cubes, "beta": cmd_beta, "riesz": cmd_riesz,
            "carleson": cmd_carleson, "wcd": cmd_wcd, "trees": cmd_trees,
            "probe": cmd_probe, "uniformity": cmd_uniformity}


def run(argv=None):
    try:
        args = parse_args(argv)
        if args.command == "generate":
            return cmd_generate(args)
        mu = io.read_cloud(args.input, n=args.n)
        return COMMANDS[args.command](args, mu)
    except (UnirectError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
