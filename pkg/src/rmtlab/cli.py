"""Command-line entry point: ``rmtlab <subcommand> [options]``.

Experiment subcommands (ensemble-sample, radial-test, lsv, stieltjes-compare,
rate-levy) accept either a JSON config via --config or inline flags.  The
remaining subcommands are single computations that print a JSON document.
Exit status is 0 on success, 1 when a hard assertion fails and 2 on bad input.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import LabError
from .experiments import (SCHEMA_VERSION, config_from_dict, load_config, parse_complex,
                          run_experiment)


def _jsonable(x):
    if isinstance(x, Fraction):
        return {"numerator": x.numerator, "denominator": x.denominator, "value": float(x)}
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.complexfloating):
        return [float(x.real), float(x.imag)]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set)):
        return [_jsonable(v) for v in x]
    return x


def _emit(args, doc):
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True)
    if not args.quiet:
        print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(text + "\n", encoding="utf-8")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _complexes(text):
    return [parse_complex(v) for v in text.split(",") if v.strip()]


def _atom(name, d=1, complex_=False):
    from .ensembles import AtomDistribution, heavy_discrete

    if name == "heavy":
        return heavy_discrete(d, complex_=complex_)
    return AtomDistribution(name, d)


# -- experiment subcommands ---------------------------------------------------------

def _experiment_config(args, experiment, **extra):
    if args.config:
        cfg = load_config(args.config)
        raw = cfg.to_json()
    else:
        raw = {
            "schema_version": SCHEMA_VERSION,
            "experiment": experiment,
            "ensemble": {"d": args.d, "kind": args.kind, "mode": args.mode},
            "sizes": [int(n) for n in args.sizes.split(",")],
            "samples": args.samples,
        }
        raw.update(extra)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out:
        raw["out"] = args.out
    return config_from_dict(raw)


def _run_config(args, cfg):
    report = run_experiment(cfg)
    if not args.quiet:
        doc = report.summary()
        doc.pop("config")
        print(json.dumps(_jsonable(doc), indent=2))
    return 0 if report.passed else 1


def cmd_ensemble_sample(args):
    cfg = _experiment_config(args, "circular-law")
    return _run_config(args, cfg)


def cmd_radial_test(args):
    extra = {"assertions": [{"metric": "radial_gap", "max": args.max_gap}]} if args.max_gap is not None else {}
    return _run_config(args, _experiment_config(args, "circular-law", **extra))


def cmd_lsv(args):
    extra = {"params": {"A_exponent": args.A}}
    if args.perturb:
        extra["perturbation"] = {"rank_exponent": 1.0, "entry_bound_exponent": 1.0, "hs_budget": 1.0}
    if args.require_zero:
        extra["assertions"] = [{"metric": "count_below", "max": 0}]
    return _run_config(args, _experiment_config(args, "lsv", **extra))


def cmd_stieltjes_compare(args):
    extra = {"grid": {"z": [str(v) for v in args.z.split(",")], "w": [str(v) for v in args.w.split(",")]}}
    return _run_config(args, _experiment_config(args, "stieltjes-compare", **extra))


def cmd_rate_levy(args):
    extra = {"truncation": {"delta": args.delta, "eta": args.eta}, "grid": {"z": args.z.split(",")}}
    return _run_config(args, _experiment_config(args, "rate-levy", **extra))


# -- single computations ----------------------------------------------------------

def cmd_cubic_eval(args):
    from .limitlaw import density_rho, solve_cubic_m

    rows = []
    for z in _complexes(args.z):
        for w in _complexes(args.w):
            sol = solve_cubic_m(z, w)
            rows.append({"z": z, "w": w, "m": sol.m, "residual": sol.residual,
                         "path_points": sol.branch_path_points})
    doc = {"solutions": rows}
    if args.density is not None:
        doc["density"] = [{"z": z, "x": x, "rho": density_rho(z, x)}
                          for z in _complexes(args.z) for x in _floats(args.density)]
    _emit(args, doc)
    return 0


def cmd_smallball(args):
    from .smallball import linear_smallball

    res = linear_smallball(_complexes(args.coeffs), _atom(args.atom), args.beta,
                           method=args.method, trials=args.trials, seed=args.seed or 0)
    _emit(args, {"rho": res.rho, "center": res.center, "method": res.method,
                 "trials": res.trials, "ci_halfwidth": res.ci_halfwidth})
    return 0


def cmd_gap(args):
    from .gap import Gap, gap_integer_relation, gap_membership

    doc = {}
    if args.relation:
        coords = [[int(c) for c in q.split(",")] for q in args.relation.split(";")]
        doc["relation"] = gap_integer_relation(coords)
    if args.generators:
        gens = [_complexes(g) for g in args.generators.split(";")]
        bounds = [int(k) for k in args.bounds.split(",")]
        q = Gap.symmetric(gens, bounds)
        doc.update(volume=q.volume, size=q.size, proper=q.is_proper)
        if q.volume <= 200:
            doc["elements"] = sorted(q.elements(), key=lambda e: (np.real(e), np.imag(e)) if np.isscalar(e) else e)
        if args.member is not None:
            hit = gap_membership(q, _complexes(args.member), args.delta)
            doc["membership"] = None if hit is None else {"point": hit.point, "coefficients": hit.coefficients,
                                                          "distance": hit.distance}
    if not doc:
        raise SystemExit("gap: give --generators/--bounds and/or --relation")
    _emit(args, doc)
    return 0


def cmd_truncation_check(args):
    from .ensembles import BlockEnsembleSpec
    from .truncation import TruncationParams, truncation_bound_report

    # quaternionic blocks need E xi^2 = 0, so the heavy atom is complexified there
    atom = _atom(args.atom, 2, complex_=args.mode == "quaternionic")
    if args.mode == "independent":
        target = atom
    else:
        target = BlockEnsembleSpec(2, ((atom, atom), (atom, atom)), args.mode)
    p = TruncationParams(delta=args.delta, eta=args.eta, n=args.n)
    rep = truncation_bound_report(target, p, trials=args.trials, seed=args.seed or 0)
    doc = {k: getattr(rep, k) for k in ("var_gap", "var_bound", "corr_gap", "corr_bound", "corr_method",
                                        "m2eta", "n0_satisfied", "hat_max", "hat_bound")}
    doc["passed"] = rep.passed
    _emit(args, doc)
    return 0 if rep.passed else 1


def cmd_decoupling_check(args):
    from .ensembles import BlockEnsembleSpec
    from .smallball import decoupling_check

    spec = BlockEnsembleSpec.uniform(args.d, args.kind)
    rep = decoupling_check(spec, args.n, args.beta, args.trials, args.seed or 0)
    doc = {k: getattr(rep, k) for k in ("rho_hat", "rho_decoupled_hat", "rho_power", "ratio",
                                        "ci_halfwidth", "ci_halfwidth_decoupled", "partition", "trials")}
    ok = args.min_ratio is None or rep.ratio >= args.min_ratio
    doc["passed"] = ok
    _emit(args, doc)
    return 0 if ok else 1


# -- parser ---------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", metavar="PATH", help="JSON experiment config")
    p.add_argument("--seed", type=int, default=None, help="64-bit master seed")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--quiet", action="store_true", help="suppress stdout")


def _ensemble_flags(p, kind="gaussian-complex", mode="independent", sizes="100", samples=1):
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--kind", default=kind)
    p.add_argument("--mode", default=mode)
    p.add_argument("--sizes", default=sizes, help="comma-separated list of n")
    p.add_argument("--samples", type=int, default=samples)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmtlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rmtlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ensemble-sample", help="sample eigenvalues of a block ensemble")
    _common(p)
    _ensemble_flags(p, mode="quaternionic", samples=50)
    p.set_defaults(func=cmd_ensemble_sample)

    p = sub.add_parser("radial-test", help="radial CDF gap against the circular law")
    _common(p)
    _ensemble_flags(p, mode="quaternionic", samples=20)
    p.add_argument("--max-gap", type=float, default=0.06)
    p.set_defaults(func=cmd_radial_test)

    p = sub.add_parser("lsv", help="least singular value tail counts")
    _common(p)
    _ensemble_flags(p, kind="bernoulli-real", sizes="50", samples=200)
    p.add_argument("--A", type=float, default=10.0, help="threshold exponent: count sigma_min <= n^-A")
    p.add_argument("--perturb", action="store_true", help="add a rank-one perturbation with entry n")
    p.add_argument("--require-zero", action="store_true", help="fail unless no trial falls below n^-A")
    p.set_defaults(func=cmd_lsv)

    p = sub.add_parser("stieltjes-compare", help="empirical vs limiting Stieltjes transform")
    _common(p)
    _ensemble_flags(p, sizes="50,100,200", samples=10)
    p.add_argument("--z", default="0.5")
    p.add_argument("--w", default="0.5+1j")
    p.set_defaults(func=cmd_stieltjes_compare)

    p = sub.add_parser("rate-levy", help="Levy distance between H_n(z) and its truncation")
    _common(p)
    _ensemble_flags(p, sizes="100", samples=3)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--z", default="0")
    p.set_defaults(func=cmd_rate_levy)

    p = sub.add_parser("cubic-eval", help="solve the cubic for m(z, w)")
    _common(p)
    p.add_argument("--z", default="0", help="comma-separated complex values")
    p.add_argument("--w", default="1j", help="comma-separated complex values with Im > 0")
    p.add_argument("--density", default=None, help="comma-separated x values for rho_z(x)")
    p.set_defaults(func=cmd_cubic_eval)

    p = sub.add_parser("smallball", help="small-ball probability of a linear form")
    _common(p)
    p.add_argument("--coeffs", required=True, help="comma-separated complex coefficients")
    p.add_argument("--atom", default="bernoulli-real")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--method", default=None, choices=["exact-enumeration", "dp-lattice", "monte-carlo"])
    p.add_argument("--trials", type=int, default=10**5)
    p.set_defaults(func=cmd_smallball)

    p = sub.add_parser("gap", help="GAP elements, membership and integer relations")
    _common(p)
    p.add_argument("--generators", help="';'-separated generators, each a comma-separated vector")
    p.add_argument("--bounds", default="1", help="comma-separated symmetric bounds K_i")
    p.add_argument("--member", default=None, help="point to test, comma-separated coordinates")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--relation", default=None, help="';'-separated integer coordinate vectors")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("truncation-check", help="variance and correlation bounds after truncation")
    _common(p)
    p.add_argument("--atom", default="heavy", help="heavy or an atom kind")
    p.add_argument("--mode", default="quaternionic")
    p.add_argument("--n", type=int, default=10**4)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=10**6)
    p.set_defaults(func=cmd_truncation_check)

    p = sub.add_parser("decoupling-check", help="Monte Carlo decoupling inequality")
    _common(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--kind", default="bernoulli-real")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=10**5)
    p.add_argument("--min-ratio", type=float, default=None)
    p.set_defaults(func=cmd_decoupling_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LabError as exc:
        print(f"rmtlab {args.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"rmtlab {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
