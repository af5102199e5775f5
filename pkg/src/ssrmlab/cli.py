"""Command-line interface.

Subcommands: generate, spectra, lcd, structure, tail-sweep, scaling,
norm-check, distance-check, smallball, quadratic.  Sweep-style commands
read a config file; the vector/matrix utilities take direct flags and
emit single-line JSON records.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import harness
from .ensemble import RngStream, dump_matrix, load_matrix, parse_distribution, sample_matrix, EnsembleParams
from .errors import CapabilityError, ParameterError
from .spectra import spectral_summary
from .structure import StructureConstants, classify_vector, lcd


def _read_vector(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        vals = [float(tok) for tok in fh.read().split()]
    if not vals:
        raise ParameterError(f"no numbers in {path!r}")
    return np.asarray(vals)


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def _constants_from_args(args) -> StructureConstants:
    kwargs = {}
    for attr, name in (
        ("c_s", "c_s"),
        ("c_d", "c_d"),
        ("c_oo", "c_oo"),
        ("lam", "lam"),
        ("L", "scale_l"),
        ("delta0", "delta0"),
        ("c_p", "c_p"),
    ):
        value = getattr(args, name, None)
        if value is not None:
            kwargs[attr] = value
    return StructureConstants(**kwargs)


def _add_constants_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--c-s", dest="c_s", type=float, default=None)
    parser.add_argument("--c-d", dest="c_d", type=float, default=None)
    parser.add_argument("--c-oo", dest="c_oo", type=float, default=None)
    parser.add_argument("--lambda", dest="lam", type=float, default=None)
    parser.add_argument("--scale-l", dest="scale_l", type=float, default=None)
    parser.add_argument("--delta0", dest="delta0", type=float, default=None)
    parser.add_argument("--c-p", dest="c_p", type=float, default=None)


def _cmd_generate(args) -> int:
    dist = parse_distribution(args.dist)
    params = EnsembleParams(n=args.n, p=args.p, dist=dist)
    A = sample_matrix(params, RngStream(args.seed, args.stream))
    if args.out:
        dump_matrix(args.out, A, p=args.p, seed=args.seed, stream_id=args.stream)
    else:
        dump_matrix(sys.stdout, A, p=args.p, seed=args.seed, stream_id=args.stream)
    return 0


def _cmd_spectra(args) -> int:
    A, header = load_matrix(args.matrix)
    summary = spectral_summary(A, tol=args.tol)
    _emit(
        {
            "n": header["n"],
            "s_min": summary.s_min,
            "s_max": summary.s_max,
            "condition_number": "inf" if math.isinf(summary.condition_number) else summary.condition_number,
            "method": summary.method,
            "residual": summary.residual,
        }
    )
    return 0


def _cmd_lcd(args) -> int:
    x = _read_vector(args.vector)
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ParameterError("zero vector")
    x = x / nrm
    res = lcd(x, args.scale_l, theta_cap=args.cap, tol=args.tol)
    _emit(
        {
            "n": int(x.size),
            "L": args.scale_l,
            "value": res.value,
            "witness_theta": None if math.isnan(res.witness_theta) else res.witness_theta,
            "witness_dist": None if math.isnan(res.witness_dist) else res.witness_dist,
            "capped": res.capped,
        }
    )
    return 0


def _cmd_structure(args) -> int:
    x = _read_vector(args.vector)
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ParameterError("zero vector")
    x = x / nrm
    consts = _constants_from_args(args)
    report = classify_vector(x, consts, alpha=args.alpha)
    _emit(
        {
            "n": int(x.size),
            "m": report.m,
            "dist_to_sparse": report.dist_to_sparse,
            "comp_member": report.comp_member,
            "dom_member": report.dom_member,
            "spread_set": list(report.spread_set) if report.spread_set is not None else None,
            "constants": {
                "c_s": consts.c_s,
                "c_d": consts.c_d,
                "c_oo": consts.c_oo,
                "lambda": consts.lam,
                "L": consts.L,
            },
        }
    )
    return 0


def _make_run_command(kind: str):
    def _cmd(args) -> int:
        return harness.run(
            args.config,
            dry_run=args.dry_run,
            seed=args.seed,
            workers=args.workers,
            out=args.out,
            kind=kind,
        )

    return _cmd


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssrmlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample one matrix to coordinate text format")
    g.add_argument("-n", type=int, required=True)
    g.add_argument("-p", type=float, required=True)
    g.add_argument("--dist", default="rademacher")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--stream", type=int, default=0)
    g.add_argument("--out", default=None)
    g.set_defaults(func=_cmd_generate)

    s = sub.add_parser("spectra", help="spectral summary of a matrix file")
    s.add_argument("--matrix", required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=_cmd_spectra)

    l = sub.add_parser("lcd", help="least common denominator of a vector file")
    l.add_argument("--vector", required=True)
    l.add_argument("--scale-l", dest="scale_l", type=float, default=1.0)
    l.add_argument("--cap", type=float, default=None)
    l.add_argument("--tol", type=float, default=1e-9)
    l.set_defaults(func=_cmd_lcd)

    st = sub.add_parser("structure", help="classify a vector file")
    st.add_argument("--vector", required=True)
    st.add_argument("--alpha", type=float, default=0.5)
    _add_constants_flags(st)
    st.set_defaults(func=_cmd_structure)

    for kind in harness.EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment from a config")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--dry-run", action="store_true")
        p.set_defaults(func=_make_run_command(kind))

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
