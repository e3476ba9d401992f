"""Command line entry point: ``python -m extrinsic_spectra <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .capacitor import CapacitorError, build_capacitors, build_test_functions, capacitor_upper_bound
from .cpn import CurveError
from .geom import ComplexError, to_mm_space
from .grassmann import IndexSampler, crofton_constant
from .spectrum import SpectrumError, spectrum_of


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        harness.emit_text(text, out)
    else:
        sys.stdout.write(text)


def cmd_spectrum(a) -> int:
    c = harness.build_complex(a.shape)
    res = spectrum_of(c, a.k, tol=a.tol, seed=a.seed)
    res.meta.update({"shape": c.label})
    _write_or_print(res.to_json() + "\n", a.out)
    return 0


def cmd_index(a) -> int:
    c = harness.build_complex(a.shape)
    s = IndexSampler(c, a.samples, a.stab_budget, a.seed, merge_grazing=not a.raw)
    if a.kind == "sup":
        est = s.sup_index()
    elif a.kind == "mean":
        est = s.mean_index()
    elif a.kind == "local":
        if a.r is None:
            raise SystemExit("--r is required for the local index")
        est = s.local_index(a.r)
    else:
        est = s.eps_index(a.eps, a.r, a.strategy)
    _write_or_print(json.dumps(harness._jsonable(est.to_dict()), sort_keys=True) + "\n", a.out)
    return 0


def cmd_crofton(a) -> int:
    est = crofton_constant(a.m, a.p, a.samples, seed=a.seed)
    _write_or_print(json.dumps(harness._jsonable(est.to_dict()), sort_keys=True) + "\n", a.out)
    return 0


def cmd_capacitor(a) -> int:
    c = harness.build_complex(a.shape)
    bound, lam = capacitor_upper_bound(c, a.n, a.r, a.metric, seed=a.seed)
    result = {"shape": c.label, "n": a.n, "r": a.r, "bound": bound, "lambda_n": lam}
    if a.dump:
        X = to_mm_space(c, a.metric)
        fam = build_test_functions(build_capacitors(X, a.n, a.r), X)
        result["family"] = fam.to_dict()
    _write_or_print(json.dumps(harness._jsonable(result), sort_keys=True) + "\n", a.out)
    return 0


def _verify(a, kind: str) -> int:
    if a.config:
        suite = harness.load_config(a.config)
        cfgs = suite.experiments
    else:
        d = {"kind": kind, "seed": a.seed, "k_max": a.k, "n_grassmann": a.samples}
        if kind == "euclidean":
            d.update(shape=a.shape, eps=a.eps, r=a.r)
        else:
            d.update(curve=json.loads(a.curve) if a.curve.lstrip().startswith("[") else a.curve)
        cfgs = [harness.ExperimentConfig.from_dict(d)]
    reports = []
    for cfg in cfgs:
        reports.extend(harness.run_experiment(cfg))
    _write_or_print(harness.render(reports, a.format), a.out)
    return 1 if any(r.verdict == "violated" for r in reports) else 0


def cmd_report(a) -> int:
    return harness.run(a.config, a.out, a.format)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="extrinsic-spectra", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, samples=64):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=int, default=samples, help="Monte Carlo sample count")
        p.add_argument("--out", help="write output here instead of stdout")

    p = sub.add_parser("spectrum", help="first k eigenvalues of a shape")
    p.add_argument("--shape", required=True, help="e.g. sphere(4), torus(2,0.5,64) or a mesh file")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-8)
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("index", help="Monte Carlo intersection indices")
    p.add_argument("--shape", required=True)
    p.add_argument("--kind", choices=["sup", "mean", "local", "eps"], default="sup")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--r", type=float)
    p.add_argument("--strategy", choices=["greedy-multiplicity", "cap-removal", "none"],
                   default="greedy-multiplicity")
    p.add_argument("--stab-budget", type=int, default=0)
    p.add_argument("--raw", action="store_true", help="count PL crossings without merging grazing runs")
    common(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("crofton", help="Grassmannian mean of the projection Jacobian")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--p", type=int, default=1)
    common(p, samples=100_000)
    p.set_defaults(func=cmd_crofton)

    p = sub.add_parser("capacitor", help="capacitor certificate for lambda_n")
    p.add_argument("--shape", required=True)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--metric", choices=["euclidean", "graph-geodesic"], default="euclidean")
    p.add_argument("--dump", action="store_true", help="include the capacitor family and test functions")
    common(p)
    p.set_defaults(func=cmd_capacitor)

    for name, kind in (("verify-euclidean", "euclidean"), ("verify-cpn", "cpn")):
        p = sub.add_parser(name, help=f"evaluate all {kind} inequalities")
        if kind == "euclidean":
            p.add_argument("--shape")
            p.add_argument("--eps", type=float, default=0.05)
            p.add_argument("--r", type=float)
        else:
            p.add_argument("--curve", help='"identity", "rnc(3)" or JSON coefficient lists')
        p.add_argument("--k", type=int, default=20)
        p.add_argument("--config", help="JSON experiment config instead of flags")
        p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
        common(p)
        p.set_defaults(func=lambda a, kind=kind: _verify(a, kind))

    p = sub.add_parser("report", help="run a config file and write its reports")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--format", choices=["jsonl", "csv"])
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "config", None) is None:
        if args.command == "verify-euclidean" and not args.shape:
            print("error: --shape or --config is required", file=sys.stderr)
            return 2
        if args.command == "verify-cpn" and not args.curve:
            print("error: --curve or --config is required", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except (harness.ConfigError, ComplexError, CurveError, CapacitorError, SpectrumError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
