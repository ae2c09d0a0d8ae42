"""Command line front end for potentials, rearrangements, and scenarios.

Exit codes: 0 all verdicts pass, 1 at least one verdict fails, 2 usage or
configuration error.
"""
import argparse
import json
import math
import os
import sys

import numpy as np

from .experiment import SCENARIOS, default_config, emit_report, \
    run_scenario, standard_configs
from .extremal import adams_profile, ball_poly_basis, extremal_spec, \
    moment_normalize
from .field import from_csv, lp_norm, to_csv
from .functional import auto_truncation, exp_functional
from .kernel import make_kernel, sharp_constants
from .potential import apply_potential
from .rearrange import decreasing_rearrangement


def _g17(value):
    if value is None:
        return "null"
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return "%.17g" % value


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="adamsq",
        description="Critical Riesz potentials: kernels, extremal families, "
                    "exponential functionals, and scenario verification.")
    parser.add_argument("--config", metavar="FILE",
                        help="JSON file of ScenarioConfig overrides")
    parser.add_argument("--seed", type=int, metavar="U64",
                        help="random seed override for scenarios")
    parser.add_argument("--out", metavar="DIR", default=".",
                        help="output directory (default: current)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="report format for verify/report")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="print the closed-form constants")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)

    p = sub.add_parser("potential", help="apply a kernel to a sampled field")
    p.add_argument("--kernel", required=True,
                   help="riesz | gradient | perturbed:<d>:<c> | "
                        "saturated:<d>:<c>")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--input", required=True, metavar="F_CSV")
    p.add_argument("--points", required=True, metavar="PROBES_CSV")
    p.add_argument("--out", dest="out_file", required=True,
                   metavar="FIELD_CSV")

    p = sub.add_parser("rearrange",
                       help="decreasing rearrangement of a sampled field")
    p.add_argument("--input", required=True, metavar="F_CSV")
    p.add_argument("--out", dest="out_file", required=True,
                   metavar="PROFILE_CSV")

    p = sub.add_parser("extremal", help="emit a normalized annulus profile")
    p.add_argument("--kernel", default="riesz")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--radial-nodes", type=int, default=2048)
    p.add_argument("--out", dest="out_file", required=True,
                   metavar="FAMILY_CSV")

    p = sub.add_parser("functional",
                       help="exponential functional of a sampled field")
    p.add_argument("--input", required=True, metavar="FIELD_CSV")
    p.add_argument("--constant", type=float, required=True)
    p.add_argument("--region", default="all",
                   help="all | ball:<R> | annulus:<a>:<b>")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--power", type=float, default=None,
                   help="exponent on |u| (default n/(n-1))")
    p.add_argument("--truncate", default=None,
                   help="'auto' or a nonnegative integer")

    p = sub.add_parser("verify", help="run scenarios against their targets")
    p.add_argument("scenario", help="scenario id or 'all'")

    sub.add_parser("report", help="run every scenario and emit reports")
    return parser


def _cmd_constants(args):
    c = sharp_constants(args.n, args.alpha)
    fields = (("n", "%d" % c.n), ("alpha", _g17(c.alpha)),
              ("c_alpha", _g17(c.c_alpha)), ("A_g", _g17(c.A_g)),
              ("ball_volume", _g17(c.ball_volume)),
              ("gamma_fractional_laplacian",
               _g17(c.gamma_fractional_laplacian)),
              ("gamma_gradient_power", _g17(c.gamma_gradient_power)))
    print("{" + ", ".join('"%s": %s' % kv for kv in fields) + "}")
    return 0


def _cmd_potential(args):
    f = from_csv(args.input)
    probes = from_csv(args.points)
    kernel = make_kernel(args.kernel, f.n, args.alpha)
    field = apply_potential(kernel, f, probes)
    base = field.base
    if base.layout == "radial":
        pts = np.asarray(base.nodes, dtype=float).reshape(-1, 1)
        coords = ["radius"]
    else:
        pts = np.atleast_2d(base.nodes).reshape(-1, base.n)
        coords = ["x%d" % i for i in range(base.n)]
    vals = np.atleast_2d(np.asarray(base.values).T).T
    err = np.asarray(field.quadrature_error, dtype=float)
    with open(args.out_file, "w") as out:
        cols = coords
        cols += ["value%d" % i for i in range(vals.shape[1])] + ["error"]
        out.write(",".join(cols) + "\n")
        for i in range(pts.shape[0]):
            row = [_g17(v) for v in pts[i]]
            row += [_g17(v) for v in vals[i]] + [_g17(err[i])]
            out.write(",".join(row) + "\n")
    print(args.out_file)
    return 0


def _cmd_rearrange(args):
    f = from_csv(args.input)
    profile = decreasing_rearrangement(f)
    with open(args.out_file, "w") as out:
        out.write("t,f_star,f_double_star\n")
        for t, s, d in zip(profile.t_grid, profile.star,
                           profile.double_star):
            out.write("%s,%s,%s\n" % (_g17(t), _g17(s), _g17(d)))
    print(args.out_file)
    return 0


def _cmd_extremal(args):
    kernel = make_kernel(args.kernel, args.n, args.alpha)
    spec = extremal_spec(kernel, args.eps, args.r, q=args.q)
    phi = adams_profile(kernel, spec, num=args.radial_nodes)
    basis = ball_poly_basis(args.n, args.n - 1, args.r)
    phit = moment_normalize(phi, basis)
    to_csv(phit, args.out_file)
    p = args.n / args.alpha
    moments = _basis_moments(phit, basis)
    sidecar = os.path.splitext(args.out_file)[0] + ".json"
    payload = [
        ('"epsilon"', _g17(spec.epsilon)), ('"r"', _g17(spec.r)),
        ('"q"', '"inf"' if spec.q == math.inf else _g17(spec.q)),
        ('"n"', "%d" % spec.n), ('"alpha"', _g17(args.alpha)),
        ('"a_g"', _g17(spec.a_g)), ('"b_r"', _g17(spec.b_r)),
        ('"b_eps_r"', _g17(spec.b_eps_r)),
        ('"lp_norm"', _g17(lp_norm(phit, p))),
        ('"moments"', "[" + ", ".join(_g17(m) for m in moments) + "]"),
    ]
    with open(sidecar, "w") as out:
        out.write("{" + ", ".join("%s: %s" % kv for kv in payload) + "}\n")
    print(args.out_file)
    print(sidecar)
    return 0


def _basis_moments(f, basis):
    """Discrete moments of f against the polynomial span it can excite.

    Radial samples only see the even radial monomials 1, |y|^2, ...; point
    clouds see every orthonormalized monomial of degree <= m.
    """
    if f.layout == "radial":
        powers = np.arange(0, basis.m + 1, 2)
        design = (np.asarray(f.nodes)[:, None] / basis.r) ** powers[None, :]
    else:
        pts = np.atleast_2d(f.nodes).reshape(-1, f.n)
        mono = np.stack([np.prod(pts ** np.asarray(e)[None, :], axis=1)
                         for e in basis.exponents], axis=1)
        design = mono @ basis.coeffs
    return [float(np.sum(f.weights * f.values * design[:, j]))
            for j in range(design.shape[1])]


def _cmd_functional(args):
    f = from_csv(args.input)
    power = args.power
    if power is None:
        power = f.n / (f.n - 1.0) if f.n > 1 else 2.0
    truncation = None
    if args.truncate is not None:
        if args.truncate == "auto":
            # power n/(n-alpha) pins alpha, hence the truncation index
            alpha = f.n * (1.0 - 1.0 / power)
            truncation = auto_truncation(f.n, alpha)
        else:
            truncation = int(args.truncate)
    rep = exp_functional(f, args.constant, power, region=args.region,
                         weight_sigma=args.sigma, truncation=truncation)
    fields = [
        ('"value"', '"inf"' if math.isinf(rep.value) else _g17(rep.value)),
        ('"constant_used"', _g17(rep.constant_used)),
        ('"region"', json.dumps(rep.region)),
        ('"measure"', json.dumps(rep.measure)),
        ('"truncation"', "null" if rep.truncation is None
         else "%d" % rep.truncation),
        ('"overflow_node"', _g17(rep.overflow_node)
         if rep.overflow_node is not None else "null"),
    ]
    print("{" + ", ".join("%s: %s" % kv for kv in fields) + "}")
    return 0


def _scenario_configs(args, names):
    overrides = {}
    if args.config:
        with open(args.config) as handle:
            overrides = json.load(handle)
        overrides.pop("scenario", None)
    if args.seed is not None:
        overrides["seed"] = args.seed
    configs = []
    for name in names:
        if overrides:
            kwargs = dict(overrides)
            kwargs["output_dir"] = kwargs.get("output_dir", args.out)
            configs.append(default_config(name, **kwargs))
        else:
            for cfg in standard_configs(name):
                configs.append(default_config(
                    name, **_branch_overrides(cfg, args.out)))
    return configs


def _branch_overrides(cfg, out_dir):
    keep = {"output_dir": out_dir}
    if cfg.label != cfg.scenario:
        keep["label"] = cfg.label
    if cfg.scenario == "adachi_scaling" and cfg.q == math.inf:
        keep["q"] = math.inf
    if cfg.scenario == "tail_scaling" and cfg.alpha != 1.0:
        keep["alpha"] = cfg.alpha
    return keep


def _cmd_verify(args, names):
    try:
        configs = _scenario_configs(args, names)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    failures = 0
    for cfg in configs:
        rep = run_scenario(cfg)
        path = emit_report(rep, args.format)
        status = "PASS" if rep.verdict else "FAIL"
        failures += 0 if rep.verdict else 1
        print("%s %-26s %s=%.6g target=%.6g +/-%.3g (%s)"
              % (status, cfg.label, rep.fitted_name, rep.fitted,
                 rep.target, max(rep.tolerance, rep.half_width), path))
    return 1 if failures else 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "constants":
            return _cmd_constants(args)
        if args.command == "potential":
            return _cmd_potential(args)
        if args.command == "rearrange":
            return _cmd_rearrange(args)
        if args.command == "extremal":
            return _cmd_extremal(args)
        if args.command == "functional":
            return _cmd_functional(args)
        if args.command == "verify":
            if args.scenario != "all" and args.scenario not in SCENARIOS:
                print("unknown scenario %r; choose from %s or 'all'"
                      % (args.scenario, ", ".join(SCENARIOS)),
                      file=sys.stderr)
                return 2
            names = SCENARIOS if args.scenario == "all" \
                else (args.scenario,)
            return _cmd_verify(args, names)
        if args.command == "report":
            return _cmd_verify(args, SCENARIOS)
    except (OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
